#include "saber/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saber/error.hpp"

// The raw-byte float32 I/O below assumes a little-endian host.
static_assert(std::endian::native == std::endian::little,
              "dataset format is little-endian; byte swapping is not implemented");

namespace saber {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kMetaName = "meta.json";
constexpr const char* kDataName = "data.f32le";
constexpr const char* kEventsName = "events.csv";
constexpr const char* kEventsHeader = "sample,code,condition,bin,angle_deg,hit,rt_ms";

std::string hemi_tag(Hemisphere h) { return hemisphere_name(h); }

Hemisphere hemi_from_tag(const std::string& tag) {
  if (tag == "left") return Hemisphere::Left;
  if (tag == "right") return Hemisphere::Right;
  if (tag == "midline") return Hemisphere::Midline;
  raise(ErrorKind::Format, "meta.json: unknown hemisphere tag '" + tag + "'");
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode) {
  std::ofstream f(p, mode);
  if (!f) raise(ErrorKind::Io, "cannot open " + p.string() + " for writing");
  return f;
}

std::ifstream open_in(const fs::path& p, std::ios::openmode mode) {
  std::ifstream f(p, mode);
  if (!f) raise(ErrorKind::Io, "cannot open " + p.string() + " for reading");
  return f;
}

// Shortest representation that round-trips; nlohmann does the same for
// doubles inside JSON, this is for the CSV columns.
std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json layout_to_json(const ElectrodeLayout& lo) {
  json j;
  j["labels"] = lo.labels;
  j["positions"] = json::array();
  for (const auto& p : lo.positions) j["positions"].push_back({p[0], p[1], p[2]});
  j["hemisphere"] = json::array();
  for (const auto h : lo.hemisphere) j["hemisphere"].push_back(hemi_tag(h));
  j["pairs"] = json::array();
  for (const auto& [l, r] : lo.pairs) j["pairs"].push_back({l, r});
  return j;
}

ElectrodeLayout layout_from_json(const json& j) {
  ElectrodeLayout lo;
  try {
    lo.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& p : j.at("positions")) {
      lo.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    }
    for (const auto& h : j.at("hemisphere")) lo.hemisphere.push_back(hemi_from_tag(h));
    for (const auto& pr : j.at("pairs")) {
      lo.pairs.emplace_back(pr.at(0).get<std::string>(), pr.at(1).get<std::string>());
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::Format, std::string("meta.json: malformed layout: ") + e.what());
  }
  return lo;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

void write_dataset(const RawRecording& rec, const fs::path& dir) {
  rec.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorKind::Io, "cannot create directory " + dir.string());

  json meta;
  meta["version"] = kDatasetFormatVersion;
  meta["rate_hz"] = rec.rate_hz;
  meta["n_channels"] = rec.n_channels();
  meta["n_samples"] = rec.n_samples();
  meta["layout"] = layout_to_json(rec.layout);
  meta["bad_channels"] = std::vector<std::string>(rec.bad_channels.begin(),
                                                  rec.bad_channels.end());
  {
    auto f = open_out(dir / kMetaName, std::ios::out);
    f << meta.dump(2) << "\n";
    if (!f) raise(ErrorKind::Io, "write failed: " + (dir / kMetaName).string());
  }

  {
    auto f = open_out(dir / kDataName, std::ios::binary);
    const std::size_t ns = rec.n_samples();
    std::vector<float> row(ns);
    for (std::size_t c = 0; c < rec.n_channels(); ++c) {
      const double* src = rec.data.row(c);
      for (std::size_t s = 0; s < ns; ++s) {
        if (!std::isfinite(src[s])) {
          raise(ErrorKind::Format, "non-finite sample in channel " + rec.layout.labels[c] +
                                       " at index " + std::to_string(s));
        }
        row[s] = static_cast<float>(src[s]);
      }
      f.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(ns * sizeof(float)));
    }
    if (!f) raise(ErrorKind::Io, "write failed: " + (dir / kDataName).string());
  }

  {
    auto f = open_out(dir / kEventsName, std::ios::out);
    f << kEventsHeader << "\n";
    for (const auto& ev : rec.events) {
      f << ev.sample_index << ',' << ev.code << ',' << condition_name(ev.condition) << ','
        << ev.bin_index << ',' << fmt_double(ev.angle_deg) << ',' << (ev.hit ? 1 : 0) << ','
        << (ev.rt_ms ? fmt_double(*ev.rt_ms) : "") << "\n";
    }
    if (!f) raise(ErrorKind::Io, "write failed: " + (dir / kEventsName).string());
  }
}

RawRecording read_dataset(const fs::path& dir) {
  RawRecording rec;

  json meta;
  {
    auto f = open_in(dir / kMetaName, std::ios::in);
    try {
      f >> meta;
    } catch (const json::exception& e) {
      raise(ErrorKind::Format, "meta.json: parse error: " + std::string(e.what()));
    }
  }
  if (!meta.contains("version") || !meta["version"].is_number_integer()) {
    raise(ErrorKind::Format, "meta.json: missing integer 'version'");
  }
  if (meta["version"].get<int>() != kDatasetFormatVersion) {
    raise(ErrorKind::Version, "unsupported dataset format version " +
                                  std::to_string(meta["version"].get<int>()));
  }
  std::size_t n_channels = 0, n_samples = 0;
  try {
    rec.rate_hz = meta.at("rate_hz").get<double>();
    n_channels = meta.at("n_channels").get<std::size_t>();
    n_samples = meta.at("n_samples").get<std::size_t>();
    rec.layout = layout_from_json(meta.at("layout"));
    for (const auto& b : meta.at("bad_channels")) {
      rec.bad_channels.insert(b.get<std::string>());
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::Format, "meta.json: " + std::string(e.what()));
  }
  if (n_channels != rec.layout.size()) {
    raise(ErrorKind::Format, "meta.json: n_channels disagrees with layout label count");
  }

  {
    const fs::path p = dir / kDataName;
    auto f = open_in(p, std::ios::binary);
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::uint64_t>(f.tellg());
    f.seekg(0, std::ios::beg);
    const std::uint64_t expected =
        static_cast<std::uint64_t>(n_channels) * n_samples * sizeof(float);
    if (bytes != expected) {
      raise(ErrorKind::SizeMismatch, p.string() + ": " + std::to_string(bytes) +
                                         " bytes, meta.json implies " + std::to_string(expected));
    }
    rec.data = Mat(n_channels, n_samples);
    std::vector<float> row(n_samples);
    for (std::size_t c = 0; c < n_channels; ++c) {
      f.read(reinterpret_cast<char*>(row.data()),
             static_cast<std::streamsize>(n_samples * sizeof(float)));
      if (!f) raise(ErrorKind::Io, "read failed: " + p.string());
      double* dst = rec.data.row(c);
      for (std::size_t s = 0; s < n_samples; ++s) dst[s] = row[s];
    }
  }

  {
    const fs::path p = dir / kEventsName;
    auto f = open_in(p, std::ios::in);
    std::string line;
    if (!std::getline(f, line) || line != kEventsHeader) {
      raise(ErrorKind::Format, p.string() + ": missing or wrong header line");
    }
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != 7) {
        raise(ErrorKind::Format,
              p.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
      }
      Event ev;
      try {
        ev.sample_index = std::stoll(fields[0]);
        ev.code = std::stoi(fields[1]);
        const auto cond = condition_from_name(fields[2]);
        if (!cond) throw std::invalid_argument("unknown condition '" + fields[2] + "'");
        ev.condition = *cond;
        ev.bin_index = std::stoi(fields[3]);
        ev.angle_deg = std::stod(fields[4]);
        ev.hit = std::stoi(fields[5]) != 0;
        if (!fields[6].empty()) ev.rt_ms = std::stod(fields[6]);
      } catch (const std::exception& e) {
        raise(ErrorKind::Format,
              p.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      rec.events.push_back(ev);
    }
  }

  if (!std::is_sorted(rec.events.begin(), rec.events.end(),
                      [](const Event& a, const Event& b) {
                        return a.sample_index < b.sample_index;
                      })) {
    log_warn("events.csv not sorted by sample; re-sorting");
    std::stable_sort(rec.events.begin(), rec.events.end(),
                     [](const Event& a, const Event& b) {
                       return a.sample_index < b.sample_index;
                     });
  }

  rec.validate();
  return rec;
}

}  // namespace saber
