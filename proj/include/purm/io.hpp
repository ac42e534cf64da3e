#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "purm/errors.hpp"
#include "purm/rl.hpp"

namespace purm {

// Shortest decimal string that round-trips the double; matches the JSON
// serializer so every artifact formats numbers the same way.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string metrics_to_csv(const RunMetrics& metrics) {
  std::ostringstream out;
  out << "step,proxy_reward_mean,true_reward_mean,kl,uncertainty_mean\n";
  for (const auto& row : metrics.rows) {
    out << row.step << ',' << format_double(row.proxy_reward_mean) << ','
        << format_double(row.true_reward_mean) << ','
        << format_double(row.kl) << ',';
    if (row.uncertainty_mean) out << format_double(*row.uncertainty_mean);
    out << '\n';
  }
  return out.str();
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunMetrics parse_metrics_csv(const std::string& text,
                                    const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "step,proxy_reward_mean,true_reward_mean,kl,uncertainty_mean") {
    throw DataError(origin + ": bad metrics header");
  }
  RunMetrics metrics;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(pos));
        break;
      }
      cells.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    if (cells.size() != 5) {
      throw DataError(origin + ": line " + std::to_string(line_no) +
                      ": expected 5 columns");
    }
    try {
      MetricsRow row;
      row.step = std::stoi(cells[0]);
      row.proxy_reward_mean = std::stod(cells[1]);
      row.true_reward_mean = std::stod(cells[2]);
      row.kl = std::stod(cells[3]);
      if (!cells[4].empty() && cells[4] != "nan") {
        row.uncertainty_mean = std::stod(cells[4]);
      }
      metrics.rows.push_back(row);
    } catch (const std::exception&) {
      throw DataError(origin + ": line " + std::to_string(line_no) +
                      ": unparseable value");
    }
  }
  return metrics;
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  return nlohmann::json{
      {"effective_learning_step", s.effective_learning_step},
      {"peak_true_reward", s.peak_true_reward},
      {"final_true_reward", s.final_true_reward},
  };
}

inline RunSummary summary_from_json(const nlohmann::json& j,
                                    const std::string& origin) {
  RunSummary s;
  try {
    s.effective_learning_step = j.at("effective_learning_step").get<int>();
    s.peak_true_reward = j.at("peak_true_reward").get<double>();
    s.final_true_reward = j.at("final_true_reward").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": bad summary: " + e.what());
  }
  return s;
}

}  // namespace purm
