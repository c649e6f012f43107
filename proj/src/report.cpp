#include "sur/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sur/error.hpp"

namespace sur {

namespace {

std::string number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(std::string_view line, std::size_t record) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(ErrorKind::MalformedCsv, "unterminated quote in record " + std::to_string(record));
  out.push_back(std::move(cur));
  return out;
}

template <typename T>
T parse_number(const std::string& text, std::size_t record) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::MalformedCsv, "bad number '" + text + "' in record " + std::to_string(record));
  }
  return value;
}

std::string svg_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  throw Error(ErrorKind::InvalidArgument, "unknown report format '" + std::string(text) + "'");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::filesystem::path lambda_table_path(const std::filesystem::path& report_path) {
  auto p = report_path;
  p.replace_extension(".lambdas.csv");
  return p;
}

std::string report_methods_csv(const EvalReport& report) {
  std::string out(kMethodCsvHeader);
  out += '\n';
  for (const auto& r : report.methods) {
    out += field(r.dataset) + ',' + field(r.method) + ',' + std::to_string(r.episodes) + ',' +
           number(r.mean_acc) + ',' + number(r.ci95) + ',' + number(r.runtime_s) + '\n';
  }
  return out;
}

std::string report_lambdas_csv(const EvalReport& report) {
  std::string out(kLambdaCsvHeader);
  out += '\n';
  for (const auto& r : report.lambdas) {
    out += field(r.dataset) + ',' + field(r.extractor) + ',' + number(r.lambda_mean) + ',' +
           number(r.lambda_ci95) + '\n';
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& r : report.methods) {
    j["methods"].push_back({{"dataset", r.dataset},
                            {"method", r.method},
                            {"episodes", r.episodes},
                            {"mean_acc", r.mean_acc},
                            {"ci95", r.ci95},
                            {"runtime_s", r.runtime_s}});
  }
  j["lambdas"] = nlohmann::ordered_json::array();
  for (const auto& r : report.lambdas) {
    j["lambdas"].push_back({{"dataset", r.dataset},
                            {"extractor", r.extractor},
                            {"lambda_mean", r.lambda_mean},
                            {"lambda_ci95", r.lambda_ci95}});
  }
  return j.dump(2) + "\n";
}

EvalReport parse_report_json(std::string_view text) {
  EvalReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& r : j.at("methods")) {
      report.methods.push_back({r.at("dataset").get<std::string>(), r.at("method").get<std::string>(),
                                r.at("episodes").get<std::size_t>(), r.at("mean_acc").get<double>(),
                                r.at("ci95").get<double>(), r.at("runtime_s").get<double>()});
    }
    for (const auto& r : j.at("lambdas")) {
      report.lambdas.push_back({r.at("dataset").get<std::string>(), r.at("extractor").get<std::string>(),
                                r.at("lambda_mean").get<double>(), r.at("lambda_ci95").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed report JSON: ") + e.what());
  }
  return report;
}

EvalReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_report_json(ss.str());
}

void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::Json) {
    write_text(path, report_json(report));
  } else {
    write_text(path, report_methods_csv(report));
    write_text(lambda_table_path(path), report_lambdas_csv(report));
  }
}

void write_lambda_dump(std::span<const LambdaTrace> traces, const std::filesystem::path& path) {
  std::string out(kLambdaDumpHeader);
  out += '\n';
  for (const auto& t : traces) {
    for (std::size_t e = 0; e < t.episodes.size(); ++e) {
      for (std::size_t k = 0; k < t.extractors.size(); ++k) {
        out += field(t.dataset) + ',' + field(t.method) + ',' + std::to_string(e) + ',' +
               field(t.extractors[k]) + ',' + number(t.episodes[e].at(k)) + '\n';
      }
    }
  }
  write_text(path, out);
}

std::vector<LambdaTrace> read_lambda_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open lambda dump " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kLambdaDumpHeader) {
    throw Error(ErrorKind::MalformedCsv, path.string() + ": expected header '" +
                                             std::string(kLambdaDumpHeader) + "'");
  }
  std::vector<LambdaTrace> traces;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (line.empty()) continue;
    const auto cells = parse_csv_line(line, record);
    if (cells.size() != 5) {
      throw Error(ErrorKind::MalformedCsv, path.string() + ": record " + std::to_string(record) +
                                               " has " + std::to_string(cells.size()) + " fields");
    }
    const auto episode = parse_number<std::size_t>(cells[2], record);
    const auto value = parse_number<double>(cells[4], record);
    const auto key = std::make_pair(cells[0], cells[1]);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, traces.size()).first;
      traces.push_back({cells[0], cells[1], {}, {}});
    }
    auto& trace = traces[it->second];
    auto name = std::find(trace.extractors.begin(), trace.extractors.end(), cells[3]);
    const auto k = static_cast<std::size_t>(name - trace.extractors.begin());
    if (name == trace.extractors.end()) {
      if (!trace.episodes.empty() && (trace.episodes.size() > 1 || episode != 0)) {
        throw Error(ErrorKind::MalformedCsv, path.string() + ": extractor '" + cells[3] +
                                                 "' first seen after episode 0 (record " +
                                                 std::to_string(record) + ")");
      }
      trace.extractors.push_back(cells[3]);
    }
    if (episode == trace.episodes.size()) {
      if (k != 0) {
        throw Error(ErrorKind::MalformedCsv, path.string() + ": record " + std::to_string(record) +
                                                 " starts an episode at extractor '" + cells[3] + "'");
      }
      trace.episodes.emplace_back();
    } else if (episode + 1 != trace.episodes.size()) {
      throw Error(ErrorKind::MalformedCsv, path.string() + ": episode " + std::to_string(episode) +
                                               " out of order at record " + std::to_string(record));
    }
    auto& lambda = trace.episodes.back();
    if (lambda.size() != k) {
      throw Error(ErrorKind::MalformedCsv, path.string() + ": extractor '" + cells[3] +
                                               "' out of order at record " + std::to_string(record));
    }
    lambda.push_back(value);
  }
  for (const auto& t : traces) {
    for (const auto& lambda : t.episodes) {
      if (lambda.size() != t.extractors.size()) {
        throw Error(ErrorKind::MalformedCsv, path.string() + ": incomplete episode in trace '" +
                                                 t.dataset + "/" + t.method + "'");
      }
    }
  }
  if (traces.empty()) throw Error(ErrorKind::MissingLambdaTrace, path.string() + " holds no lambda rows");
  return traces;
}

std::string heatmap_csv(const LambdaHeatmap& heatmap) {
  std::string out = "extractor";
  for (const auto& d : heatmap.datasets) out += ',' + field(d + ":mean") + ',' + field(d + ":ci95");
  out += '\n';
  for (std::size_t i = 0; i < heatmap.extractors.size(); ++i) {
    out += field(heatmap.extractors[i]);
    for (const auto& cell : heatmap.cells[i]) out += ',' + number(cell.mean) + ',' + number(cell.ci95);
    out += '\n';
  }
  return out;
}

std::string heatmap_svg(const LambdaHeatmap& heatmap) {
  constexpr int cell = 48, left = 160, top = 120;
  const int width = left + cell * static_cast<int>(heatmap.datasets.size()) + 20;
  const int height = top + cell * static_cast<int>(heatmap.extractors.size()) + 20;
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t j = 0; j < heatmap.datasets.size(); ++j) {
    const int x = left + cell * static_cast<int>(j) + cell / 2;
    os << "  <text transform=\"translate(" << x << "," << top - 6 << ") rotate(-60)\">"
       << svg_escape(heatmap.datasets[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < heatmap.extractors.size(); ++i) {
    const int y = top + cell * static_cast<int>(i);
    os << "  <text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"end\">"
       << svg_escape(heatmap.extractors[i]) << "</text>\n";
    for (std::size_t j = 0; j < heatmap.datasets.size(); ++j) {
      const double v = heatmap.cells[i][j].mean;
      const int x = left + cell * static_cast<int>(j);
      const int shade = std::isnan(v) ? 255 : static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(v, 0.0, 1.0))));
      os << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
         << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#999\"/>\n";
      if (!std::isnan(v)) {
        os << "  <text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
           << "\" text-anchor=\"middle\" fill=\"" << (v > 0.5 ? "white" : "black") << "\">" << v
           << "</text>\n";
      }
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string format_summary(const EvalReport& report) {
  const auto ranking = rank_methods(report);
  std::size_t wd = 7, wm = 6;
  for (const auto& r : report.methods) {
    wd = std::max(wd, r.dataset.size());
    wm = std::max(wm, r.method.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(wd)) << "dataset" << "  " << std::setw(static_cast<int>(wm))
     << "method" << "  " << std::right << std::setw(8) << "episodes" << "  " << std::setw(15)
     << "accuracy (%)" << "  " << std::setw(9) << "time (s)" << '\n';
  for (const auto& r : report.methods) {
    char mark = ' ';
    for (const auto& rank : ranking) {
      if (rank.dataset != r.dataset) continue;
      if (rank.best == r.method) mark = '*';
      else if (std::find(rank.overlapping.begin(), rank.overlapping.end(), r.method) != rank.overlapping.end())
        mark = '~';
    }
    std::ostringstream acc;
    acc << std::fixed << std::setprecision(2) << r.mean_acc << " +- " << r.ci95;
    os << std::left << std::setw(static_cast<int>(wd)) << r.dataset << "  " << std::setw(static_cast<int>(wm))
       << r.method << "  " << std::right << std::setw(8) << r.episodes << "  " << std::setw(15) << acc.str()
       << mark << " " << std::setw(9) << std::fixed << std::setprecision(2) << r.runtime_s << '\n';
  }
  return os.str();
}

}  // namespace sur
