#pragma once

#include <string>
#include <vector>

#include "smmpc/lti_plant.hpp"
#include "smmpc/types.hpp"

namespace smmpc {

/// 17-significant-digit decimal rendering (round-trip exact for doubles).
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  Matrix data;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& data);

/// Header `t,u_1..u_nu,y_1..y_ny`, one row per step, t starting at 1.
void write_record_csv(const std::string& path, const DataRecord& record);

/// Channel counts are recovered from the header. The noise_free flag is not
/// part of the format and must be supplied by the caller.
DataRecord read_record_csv(const std::string& path, bool noise_free = false);

}  // namespace smmpc
