#include "photon_da/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "photon_da/errors.hpp"

namespace photon_da {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
  throw ValidationError(message);
}

constexpr std::uint16_t kCubeVersion = 1;
constexpr std::uint16_t kDepthVersion = 1;
constexpr std::uint16_t kCheckpointVersion = 1;
constexpr std::uint16_t kCountsU16 = 0;
constexpr std::uint16_t kCountsU32 = 1;

// ---------------------------------------------------------------------------
// Little-endian byte plumbing.

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k)
    out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string file)
      : bytes_(bytes), file_(std::move(file)) {}

  std::uint16_t u16(const char* field) {
    need(2, field);
    const auto* p = data();
    pos_ += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t u32(const char* field) {
    need(4, field);
    const auto* p = data();
    pos_ += 4;
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  }

  float f32(const char* field) {
    const std::uint32_t bits = u32(field);
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string_view take(std::size_t n, const char* field) {
    need(n, field);
    const std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void expect_magic(const char* magic) {
    const std::string_view got = take(4, "magic");
    if (got != std::string_view(magic, 4))
      fail(file_ + ": bad magic '" + std::string(got) + "', expected '" +
           magic + "'");
  }

  void expect_version(std::uint16_t expected) {
    const std::uint16_t got = u16("version");
    if (got != expected)
      fail(file_ + ": unsupported version " + std::to_string(got) +
           ", expected " + std::to_string(expected));
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void expect_end() {
    if (remaining() != 0)
      fail(file_ + ": " + std::to_string(remaining()) +
           " unexpected trailing bytes after the payload");
  }

  const std::string& file() const { return file_; }

 private:
  const unsigned char* data() const {
    return reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
  }

  void need(std::size_t n, const char* field) {
    if (pos_ + n > bytes_.size()) {
      if (pos_ < 20 && bytes_.size() < 20)
        fail(file_ + ": truncated header while reading " + field);
      fail(file_ + ": truncated payload: needed " + std::to_string(n) +
           " more bytes for " + field + ", file ends after " +
           std::to_string(bytes_.size()) + " bytes");
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string file_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

// Writes via a temp file in the same directory, then renames into place, so
// a crash never leaves a half-written artifact under the final name.
void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp~";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail("failed writing " + std::to_string(bytes.size()) +
                   " bytes to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail("cannot move '" + tmp + "' into '" + path + "': " + ec.message());
}

std::uint32_t checked_dim(std::int64_t v, const char* field) {
  if (v <= 0)
    fail(std::string("dimension ") + field + " must be positive, got " +
         std::to_string(v));
  if (v > static_cast<std::int64_t>(UINT32_MAX))
    fail(std::string("dim overflow: ") + field + " = " + std::to_string(v) +
         " exceeds the u32 header field");
  return static_cast<std::uint32_t>(v);
}

json sim_to_json(const SimConfig& sc) {
  return json{{"t_bins", sc.t_bins},   {"delta_ps", sc.delta_ps},
              {"n_illum", sc.n_illum}, {"eta", sc.eta},
              {"signal_mean", sc.signal_mean},
              {"noise_mean", sc.noise_mean}};
}

SimConfig sim_from_json(const json& j, const std::string& file) {
  SimConfig sc;
  try {
    sc.t_bins = j.at("t_bins").get<std::int64_t>();
    sc.delta_ps = j.at("delta_ps").get<double>();
    sc.n_illum = j.at("n_illum").get<std::int64_t>();
    sc.eta = j.at("eta").get<double>();
    sc.signal_mean = j.at("signal_mean").get<double>();
    sc.noise_mean = j.at("noise_mean").get<double>();
  } catch (const json::exception& e) {
    fail(file + ": malformed simulation metadata: " + e.what());
  }
  return sc;
}

json parse_metadata(std::string_view text, const std::string& file) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(file + ": metadata is not valid JSON: " + e.what());
  }
}

void append_metadata(std::string& out, const json& meta) {
  const std::string text = meta.dump();
  if (text.size() > UINT32_MAX) fail("metadata block too large");
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
}

json take_metadata(ByteReader& reader) {
  const std::uint32_t len = reader.u32("metadata length");
  const std::string_view text = reader.take(len, "metadata");
  return parse_metadata(text, reader.file());
}

}  // namespace

// ---------------------------------------------------------------------------
// Cube files.

void write_cube(const HistogramCube& cube, const std::string& path,
                bool wide_counts, const std::string& created) {
  const std::uint32_t t = checked_dim(cube.t_bins, "t_bins");
  const std::uint32_t nx = checked_dim(cube.nx, "nx");
  const std::uint32_t ny = checked_dim(cube.ny, "ny");
  const std::size_t voxels = static_cast<std::size_t>(cube.t_bins) *
                             static_cast<std::size_t>(cube.nx) *
                             static_cast<std::size_t>(cube.ny);
  if (cube.counts.size() != voxels)
    fail("cube holds " + std::to_string(cube.counts.size()) +
         " counts for dims [" + std::to_string(cube.t_bins) + ", " +
         std::to_string(cube.nx) + ", " + std::to_string(cube.ny) + "]");
  if (!wide_counts)
    for (std::size_t k = 0; k < voxels; ++k)
      if (cube.counts[k] > 0xffffu)
        fail("count " + std::to_string(cube.counts[k]) + " at flat index " +
             std::to_string(k) +
             " does not fit u16 storage; write with wide_counts to store "
             "u32");

  std::string out;
  out.reserve(20 + voxels * (wide_counts ? 4 : 2) + 256);
  out += "PHDC";
  put_u16(out, kCubeVersion);
  put_u32(out, t);
  put_u32(out, nx);
  put_u32(out, ny);
  put_u16(out, wide_counts ? kCountsU32 : kCountsU16);
  for (const std::uint32_t c : cube.counts) {
    if (wide_counts)
      put_u32(out, c);
    else
      put_u16(out, static_cast<std::uint16_t>(c));
  }
  json meta{{"sim", sim_to_json(cube.meta)}, {"seed", cube.meta.seed}};
  if (!created.empty()) meta["created"] = created;
  append_metadata(out, meta);
  atomic_write(path, out);
}

HistogramCube read_cube(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader reader(bytes, "cube file '" + path + "'");
  reader.expect_magic("PHDC");
  reader.expect_version(kCubeVersion);
  HistogramCube cube;
  cube.t_bins = reader.u32("t_bins");
  cube.nx = reader.u32("nx");
  cube.ny = reader.u32("ny");
  if (cube.t_bins == 0 || cube.nx == 0 || cube.ny == 0)
    fail(reader.file() + ": header dimension is zero ([" +
         std::to_string(cube.t_bins) + ", " + std::to_string(cube.nx) + ", " +
         std::to_string(cube.ny) + "])");
  const std::uint16_t tag = reader.u16("count dtype tag");
  if (tag != kCountsU16 && tag != kCountsU32)
    fail(reader.file() + ": unsupported count dtype tag " +
         std::to_string(tag));
  const std::size_t width = tag == kCountsU32 ? 4 : 2;
  // Hostile headers can claim more voxels than any real file holds; compare
  // in 128 bits so the product cannot wrap before the size check.
  const unsigned __int128 claimed = static_cast<unsigned __int128>(cube.t_bins) *
                                    static_cast<unsigned __int128>(cube.nx) *
                                    static_cast<unsigned __int128>(cube.ny) *
                                    width;
  if (claimed > reader.remaining())
    fail(reader.file() + ": truncated payload: header claims " +
         std::to_string(cube.t_bins) + "*" + std::to_string(cube.nx) + "*" +
         std::to_string(cube.ny) + " counts but only " +
         std::to_string(reader.remaining()) + " bytes follow the header");
  const std::size_t voxels = static_cast<std::size_t>(cube.t_bins) *
                             static_cast<std::size_t>(cube.nx) *
                             static_cast<std::size_t>(cube.ny);
  cube.counts.resize(voxels);
  const std::string_view payload = reader.take(voxels * width, "counts");
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t k = 0; k < voxels; ++k, p += width) {
    std::uint32_t c = static_cast<std::uint32_t>(p[0]) |
                      (static_cast<std::uint32_t>(p[1]) << 8);
    if (width == 4)
      c |= (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
    cube.counts[k] = c;
  }
  const json meta = take_metadata(reader);
  reader.expect_end();
  cube.meta = sim_from_json(meta.at("sim"), reader.file());
  try {
    cube.meta.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(reader.file() + ": malformed seed metadata: " + e.what());
  }
  if (cube.meta.t_bins != cube.t_bins)
    fail(reader.file() + ": header t_bins " + std::to_string(cube.t_bins) +
         " disagrees with metadata t_bins " +
         std::to_string(cube.meta.t_bins));
  return cube;
}

// ---------------------------------------------------------------------------
// Depth files.

void write_depth(const DepthMap& depth, const std::string& path,
                 const std::string& created) {
  const std::uint32_t nx = checked_dim(depth.nx, "nx");
  const std::uint32_t ny = checked_dim(depth.ny, "ny");
  if (depth.z.size() != static_cast<std::size_t>(depth.pixels()))
    fail("depth map holds " + std::to_string(depth.z.size()) +
         " values for dims [" + std::to_string(depth.nx) + ", " +
         std::to_string(depth.ny) + "]");
  std::string out;
  out.reserve(14 + depth.z.size() * 4 + 64);
  out += "PHDZ";
  put_u16(out, kDepthVersion);
  put_u32(out, nx);
  put_u32(out, ny);
  for (const float v : depth.z) put_f32(out, v);
  json meta = json::object();
  if (!created.empty()) meta["created"] = created;
  append_metadata(out, meta);
  atomic_write(path, out);
}

DepthMap read_depth(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader reader(bytes, "depth file '" + path + "'");
  reader.expect_magic("PHDZ");
  reader.expect_version(kDepthVersion);
  DepthMap depth;
  depth.nx = reader.u32("nx");
  depth.ny = reader.u32("ny");
  if (depth.nx == 0 || depth.ny == 0)
    fail(reader.file() + ": header dimension is zero ([" +
         std::to_string(depth.nx) + ", " + std::to_string(depth.ny) + "])");
  const unsigned __int128 claimed = static_cast<unsigned __int128>(depth.nx) *
                                    static_cast<unsigned __int128>(depth.ny) *
                                    4u;
  if (claimed > reader.remaining())
    fail(reader.file() + ": truncated payload: header claims " +
         std::to_string(depth.nx) + "*" + std::to_string(depth.ny) +
         " pixels but only " + std::to_string(reader.remaining()) +
         " bytes follow the header");
  const auto pixels =
      static_cast<std::size_t>(depth.nx) * static_cast<std::size_t>(depth.ny);
  depth.z.resize(pixels);
  for (std::size_t k = 0; k < pixels; ++k) depth.z[k] = reader.f32("depth");
  (void)take_metadata(reader);
  reader.expect_end();
  return depth;
}

// ---------------------------------------------------------------------------
// Checkpoints.

void write_checkpoint(const Checkpoint& ck, const std::string& path,
                      const std::string& created) {
  json manifest = json::array();
  std::size_t total = 0;
  for (const auto& p : ck.params.order) {
    const Tensor<float>& t = ck.params.at(p);
    manifest.push_back(json{{"path", p}, {"shape", t.shape()}});
    total += static_cast<std::size_t>(t.size());
  }
  json header{{"net",
               {{"t_bins", ck.net.t_bins},
                {"n_t", ck.net.n_t},
                {"n_s", ck.net.n_s},
                {"trunk_channels", ck.net.trunk_channels},
                {"pools", ck.net.pools},
                {"patch", ck.net.patch}}},
              {"seed", ck.seed},
              {"params", std::move(manifest)}};
  if (!created.empty()) header["created"] = created;

  std::string out;
  out.reserve(6 + total * 4 + 1024);
  out += "PHCK";
  put_u16(out, kCheckpointVersion);
  append_metadata(out, header);
  for (const auto& p : ck.params.order)
    for (const float v : ck.params.at(p).values()) put_f32(out, v);
  atomic_write(path, out);
}

Checkpoint read_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader reader(bytes, "checkpoint '" + path + "'");
  reader.expect_magic("PHCK");
  reader.expect_version(kCheckpointVersion);
  const json header = take_metadata(reader);

  Checkpoint ck;
  try {
    const json& net = header.at("net");
    ck.net.t_bins = net.at("t_bins").get<std::int64_t>();
    ck.net.n_t = net.at("n_t").get<int>();
    ck.net.n_s = net.at("n_s").get<int>();
    ck.net.trunk_channels = net.at("trunk_channels").get<std::vector<int>>();
    ck.net.pools = net.at("pools").get<int>();
    const auto patch = net.at("patch").get<std::vector<std::int64_t>>();
    if (patch.size() != 2)
      fail(reader.file() + ": patch must hold exactly two extents");
    ck.net.patch = {patch[0], patch[1]};
    ck.seed = header.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(reader.file() + ": malformed header: " + e.what());
  }
  ck.net = ck.net.with_derived();

  try {
    for (const json& entry : header.at("params")) {
      const auto p = entry.at("path").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const std::int64_t n = numel(shape);
      if (n <= 0)
        fail(reader.file() + ": parameter '" + p + "' has empty shape");
      std::vector<float> data(static_cast<std::size_t>(n));
      for (auto& v : data) v = reader.f32("parameter blob");
      ck.params.add(p, Tensor<float>::from_data(shape, std::move(data),
                                                /*requires_grad=*/true));
    }
  } catch (const json::exception& e) {
    fail(reader.file() + ": malformed parameter manifest: " + e.what());
  }
  reader.expect_end();
  return ck;
}

// ---------------------------------------------------------------------------
// Text profiles and graymaps.

std::vector<double> read_profile(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::vector<double> samples;
  std::string line;
  int line_no = 0;
  double sum = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(begin, end - begin + 1);
    char* stop = nullptr;
    const double v = std::strtod(token.c_str(), &stop);
    if (stop != token.c_str() + token.size() || !std::isfinite(v))
      fail("profile '" + path + "' line " + std::to_string(line_no) +
           ": expected one sample, got '" + token + "'");
    if (v < 0.0)
      fail("profile '" + path + "' line " + std::to_string(line_no) +
           ": negative sample " + token);
    samples.push_back(v);
    sum += v;
  }
  if (samples.empty()) fail("profile '" + path + "' holds no samples");
  if (sum <= 0.0) fail("profile '" + path + "' sums to zero");
  for (auto& v : samples) v /= sum;
  return samples;
}

void write_graymap(const DepthMap& depth, const std::string& path) {
  checked_dim(depth.nx, "nx");
  checked_dim(depth.ny, "ny");
  if (depth.z.size() != static_cast<std::size_t>(depth.pixels()))
    fail("depth map holds " + std::to_string(depth.z.size()) +
         " values for dims [" + std::to_string(depth.nx) + ", " +
         std::to_string(depth.ny) + "]");
  float lo = 0.0f, hi = 0.0f;
  bool any = false;
  for (const float v : depth.z) {
    if (!std::isfinite(v)) continue;
    if (!any || v < lo) lo = v;
    if (!any || v > hi) hi = v;
    any = true;
  }
  if (!any) lo = hi = 0.0f;
  const double span = static_cast<double>(hi) - static_cast<double>(lo);

  std::string out = "P5\n" + std::to_string(depth.ny) + " " +
                    std::to_string(depth.nx) + "\n65535\n";
  for (const float v : depth.z) {
    std::uint16_t g = 0;
    if (std::isfinite(v) && span > 0.0)
      g = static_cast<std::uint16_t>(
          std::lround((static_cast<double>(v) - lo) / span * 65535.0));
    else if (std::isfinite(v) && any)
      g = 0;
    // PGM stores 16-bit samples most significant byte first.
    out.push_back(static_cast<char>((g >> 8) & 0xff));
    out.push_back(static_cast<char>(g & 0xff));
  }
  atomic_write(path, out);

  std::ostringstream sidecar;
  sidecar << std::setprecision(10) << "min " << lo << "\nmax " << hi << "\n";
  atomic_write(path + ".minmax.txt", sidecar.str());
}

void write_text(const std::string& path, const std::string& text) {
  atomic_write(path, text);
}

std::string read_text(const std::string& path) { return read_file(path); }

// ---------------------------------------------------------------------------
// Run configuration.

namespace {

// Registry of every legal key per section; parsing rejects anything else.
const std::map<std::string, std::set<std::string>>& key_registry() {
  static const std::map<std::string, std::set<std::string>> registry = {
      {"sim",
       {"t_bins", "delta_ps", "n_illum", "eta", "pulse_fwhm_ps",
        "pulse_support"}},
      {"scene", {"nx", "ny", "z_min", "z_max"}},
      {"dataset",
       {"source_sbr", "target_sbr", "source_count", "target_count"}},
      {"net", {"n_t", "n_s", "trunk_channels", "pools", "patch_h", "patch_w"}},
      {"train",
       {"epochs", "batch_size", "lr", "lambda_tv", "lambda_a",
        "checkpoint_every", "max_adapt_iters"}},
      {"run", {"seed", "out_dir"}},
      {"paths",
       {"dataset_dir", "target_dir", "checkpoint", "input_dir",
        "predictions_dir", "truth_dir"}},
  };
  return registry;
}

struct ConfigCursor {
  int line_no = 0;
  std::string section;
  std::string key;

  std::string where() const {
    return "config line " + std::to_string(line_no) + " ([" + section + "] " +
           key + ")";
  }
};

double parse_double(const std::string& value, const ConfigCursor& at) {
  char* stop = nullptr;
  const double v = std::strtod(value.c_str(), &stop);
  if (value.empty() || stop != value.c_str() + value.size() ||
      !std::isfinite(v))
    fail(at.where() + ": expected a number, got '" + value + "'");
  return v;
}

std::int64_t parse_int(const std::string& value, const ConfigCursor& at) {
  std::int64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    fail(at.where() + ": expected an integer, got '" + value + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& value, const ConfigCursor& at) {
  std::uint64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    fail(at.where() + ": expected a non-negative integer, got '" + value +
         "'");
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    if (begin == std::string::npos) {
      out.push_back("");
      continue;
    }
    const auto end = item.find_last_not_of(" \t");
    out.push_back(item.substr(begin, end - begin + 1));
  }
  return out;
}

std::vector<SbrPoint> parse_sbr_list(const std::string& value,
                                     const ConfigCursor& at) {
  std::vector<SbrPoint> out;
  for (const auto& item : split_list(value)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == item.size())
      fail(at.where() + ": expected signal:noise pairs, got '" + item + "'");
    SbrPoint p;
    p.signal = parse_double(item.substr(0, colon), at);
    p.noise = parse_double(item.substr(colon + 1), at);
    out.push_back(p);
  }
  if (out.empty()) fail(at.where() + ": expected at least one pair");
  return out;
}

std::vector<int> parse_int_list(const std::string& value,
                                const ConfigCursor& at) {
  std::vector<int> out;
  for (const auto& item : split_list(value))
    out.push_back(static_cast<int>(parse_int(item, at)));
  if (out.empty()) fail(at.where() + ": expected at least one integer");
  return out;
}

std::string render_double(double v) {
  // Shortest decimal form that parses back to the same double.
  std::array<char, 64> buf;
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) fail("cannot render double value");
  return std::string(buf.data(), end);
}

std::string render_sbr(const std::vector<SbrPoint>& list) {
  std::string out;
  for (std::size_t k = 0; k < list.size(); ++k) {
    if (k) out += ", ";
    out += render_double(list[k].signal) + ":" + render_double(list[k].noise);
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  ConfigCursor at;
  std::set<std::string> seen;

  while (std::getline(in, line)) {
    ++at.line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    const std::string body = line.substr(begin, end - begin + 1);

    if (body.front() == '[') {
      if (body.back() != ']')
        fail("config line " + std::to_string(at.line_no) +
             ": malformed section header '" + body + "'");
      at.section = body.substr(1, body.size() - 2);
      if (!key_registry().count(at.section))
        fail("config line " + std::to_string(at.line_no) +
             ": unknown section [" + at.section + "]");
      continue;
    }

    const auto eq = body.find('=');
    if (eq == std::string::npos)
      fail("config line " + std::to_string(at.line_no) +
           ": expected 'key = value', got '" + body + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    at.key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (at.key.empty())
      fail("config line " + std::to_string(at.line_no) + ": empty key");
    if (at.section.empty())
      fail("config line " + std::to_string(at.line_no) + ": key '" + at.key +
           "' appears before any [section] header");
    const auto& allowed = key_registry().at(at.section);
    if (!allowed.count(at.key))
      fail("config line " + std::to_string(at.line_no) + ": unknown key '" +
           at.key + "' in section [" + at.section + "]");
    if (!seen.insert(at.section + "." + at.key).second)
      fail("config line " + std::to_string(at.line_no) + ": duplicate key '" +
           at.key + "' in section [" + at.section + "]");

    if (at.section == "sim") {
      if (at.key == "t_bins") cfg.sim.t_bins = parse_int(value, at);
      else if (at.key == "delta_ps") cfg.sim.delta_ps = parse_double(value, at);
      else if (at.key == "n_illum") cfg.sim.n_illum = parse_int(value, at);
      else if (at.key == "eta") cfg.sim.eta = parse_double(value, at);
      else if (at.key == "pulse_fwhm_ps")
        cfg.pulse_fwhm_ps = parse_double(value, at);
      else if (at.key == "pulse_support")
        cfg.pulse_support = static_cast<int>(parse_int(value, at));
    } else if (at.section == "scene") {
      if (at.key == "nx") cfg.scene_nx = parse_int(value, at);
      else if (at.key == "ny") cfg.scene_ny = parse_int(value, at);
      else if (at.key == "z_min") cfg.z_min = parse_double(value, at);
      else if (at.key == "z_max") cfg.z_max = parse_double(value, at);
    } else if (at.section == "dataset") {
      if (at.key == "source_sbr") cfg.source_sbr = parse_sbr_list(value, at);
      else if (at.key == "target_sbr")
        cfg.target_sbr = parse_sbr_list(value, at);
      else if (at.key == "source_count")
        cfg.source_count = parse_int(value, at);
      else if (at.key == "target_count")
        cfg.target_count = parse_int(value, at);
    } else if (at.section == "net") {
      if (at.key == "n_t") cfg.net.n_t = static_cast<int>(parse_int(value, at));
      else if (at.key == "n_s")
        cfg.net.n_s = static_cast<int>(parse_int(value, at));
      else if (at.key == "trunk_channels")
        cfg.net.trunk_channels = parse_int_list(value, at);
      else if (at.key == "pools")
        cfg.net.pools = static_cast<int>(parse_int(value, at));
      else if (at.key == "patch_h") cfg.net.patch[0] = parse_int(value, at);
      else if (at.key == "patch_w") cfg.net.patch[1] = parse_int(value, at);
    } else if (at.section == "train") {
      if (at.key == "epochs") cfg.train.epochs = parse_int(value, at);
      else if (at.key == "batch_size")
        cfg.train.batch_size = parse_int(value, at);
      else if (at.key == "lr") cfg.train.lr = parse_double(value, at);
      else if (at.key == "lambda_tv")
        cfg.train.lambda_tv = parse_double(value, at);
      else if (at.key == "lambda_a")
        cfg.train.lambda_a = parse_double(value, at);
      else if (at.key == "checkpoint_every")
        cfg.train.checkpoint_every = parse_int(value, at);
      else if (at.key == "max_adapt_iters")
        cfg.train.max_adapt_iters = parse_int(value, at);
    } else if (at.section == "run") {
      if (at.key == "seed") cfg.seed = parse_u64(value, at);
      else if (at.key == "out_dir") cfg.out_dir = value;
    } else if (at.section == "paths") {
      if (at.key == "dataset_dir") cfg.dataset_dir = value;
      else if (at.key == "target_dir") cfg.target_dir = value;
      else if (at.key == "checkpoint") cfg.checkpoint = value;
      else if (at.key == "input_dir") cfg.input_dir = value;
      else if (at.key == "predictions_dir") cfg.predictions_dir = value;
      else if (at.key == "truth_dir") cfg.truth_dir = value;
    }
  }

  // The network always ingests what the simulator emits.
  cfg.net.t_bins = cfg.sim.t_bins;
  cfg.net = cfg.net.with_derived();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

std::string render_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[sim]\n";
  os << "t_bins = " << cfg.sim.t_bins << "\n";
  os << "delta_ps = " << render_double(cfg.sim.delta_ps) << "\n";
  os << "n_illum = " << cfg.sim.n_illum << "\n";
  os << "eta = " << render_double(cfg.sim.eta) << "\n";
  os << "pulse_fwhm_ps = " << render_double(cfg.pulse_fwhm_ps) << "\n";
  os << "pulse_support = " << cfg.pulse_support << "\n";
  os << "\n[scene]\n";
  os << "nx = " << cfg.scene_nx << "\n";
  os << "ny = " << cfg.scene_ny << "\n";
  os << "z_min = " << render_double(cfg.z_min) << "\n";
  os << "z_max = " << render_double(cfg.z_max) << "\n";
  os << "\n[dataset]\n";
  os << "source_sbr = " << render_sbr(cfg.source_sbr) << "\n";
  os << "target_sbr = " << render_sbr(cfg.target_sbr) << "\n";
  os << "source_count = " << cfg.source_count << "\n";
  os << "target_count = " << cfg.target_count << "\n";
  os << "\n[net]\n";
  os << "n_t = " << cfg.net.n_t << "\n";
  os << "n_s = " << cfg.net.n_s << "\n";
  os << "trunk_channels = ";
  for (std::size_t k = 0; k < cfg.net.trunk_channels.size(); ++k)
    os << (k ? ", " : "") << cfg.net.trunk_channels[k];
  os << "\n";
  os << "pools = " << cfg.net.pools << "\n";
  os << "patch_h = " << cfg.net.patch[0] << "\n";
  os << "patch_w = " << cfg.net.patch[1] << "\n";
  os << "\n[train]\n";
  os << "epochs = " << cfg.train.epochs << "\n";
  os << "batch_size = " << cfg.train.batch_size << "\n";
  os << "lr = " << render_double(cfg.train.lr) << "\n";
  os << "lambda_tv = " << render_double(cfg.train.lambda_tv) << "\n";
  os << "lambda_a = " << render_double(cfg.train.lambda_a) << "\n";
  os << "checkpoint_every = " << cfg.train.checkpoint_every << "\n";
  os << "max_adapt_iters = " << cfg.train.max_adapt_iters << "\n";
  os << "\n[run]\n";
  os << "seed = " << cfg.seed << "\n";
  os << "out_dir = " << cfg.out_dir << "\n";
  os << "\n[paths]\n";
  os << "dataset_dir = " << cfg.dataset_dir << "\n";
  os << "target_dir = " << cfg.target_dir << "\n";
  os << "checkpoint = " << cfg.checkpoint << "\n";
  os << "input_dir = " << cfg.input_dir << "\n";
  os << "predictions_dir = " << cfg.predictions_dir << "\n";
  os << "truth_dir = " << cfg.truth_dir << "\n";
  return os.str();
}

}  // namespace photon_da
