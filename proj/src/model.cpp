#include "chromnet/model.hpp"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "chromnet/error.hpp"
#include "chromnet/format.hpp"

namespace chromnet {

namespace {

constexpr const char* kMagic = "chromnet-model";
constexpr const char* kEndHeader = "end_header";

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& item : items) s += (s.empty() ? "" : ",") + item;
  return s;
}

template <typename T>
std::string join_numbers(const std::vector<T>& items) {
  std::string s;
  for (const auto& item : items) {
    if (!s.empty()) s += ',';
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(item);
    } else {
      s += std::to_string(item);
    }
  }
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(s.substr(start, comma - start));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw IntegrityError("model header field '" + key + "' has malformed value '" + text + "'");
  }
  return v;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<T>(key, item));
  return out;
}

}  // namespace

InputTransform InputTransform::fit(const Dataset& data, bool log1p, bool standardize) {
  InputTransform t;
  t.log1p = log1p;
  t.standardize = standardize;
  if (!standardize) return t;
  if (data.empty()) throw DomainError("cannot fit standardization on an empty dataset");
  const std::size_t marks = data.mark_count();
  t.mean.assign(marks, 0.0);
  t.scale.assign(marks, 1.0);
  std::vector<double> sq(marks, 0.0);
  const double count = static_cast<double>(data.size() * data.bin_count);
  for (const auto& s : data.samples) {
    for (std::size_t j = 0; j < marks; ++j) {
      for (double v : s.signal.row(j)) {
        const double u = log1p ? std::log1p(v) : v;
        t.mean[j] += u;
        sq[j] += u * u;
      }
    }
  }
  for (std::size_t j = 0; j < marks; ++j) {
    t.mean[j] /= count;
    const double var = std::max(sq[j] / count - t.mean[j] * t.mean[j], 0.0);
    const double sd = std::sqrt(var);
    t.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return t;
}

Matrix InputTransform::apply(const Matrix& signal) const {
  if (is_identity()) return signal;
  if (standardize && (mean.size() != signal.rows() || scale.size() != signal.rows())) {
    throw DimensionError("standardization statistics do not match the mark count");
  }
  Matrix out = signal;
  for (std::size_t j = 0; j < out.rows(); ++j) {
    for (double& v : out.row(j)) {
      if (log1p) v = std::log1p(v);
      if (standardize) v = (v - mean[j]) / scale[j];
    }
  }
  return out;
}

void TrainedModel::check_compatible(const Dataset& data) const {
  if (data.mark_names != mark_names) {
    throw SchemaError("dataset marks [" + join(data.mark_names) + "] do not match model marks [" +
                      join(mark_names) + "]");
  }
  if (!data.empty() && data.bin_count != hyper.bins) {
    throw DimensionError("dataset has " + std::to_string(data.bin_count) +
                         " bins, model expects " + std::to_string(hyper.bins));
  }
}

TrainedModel zero_model(const Hyperparams& h, std::vector<std::string> mark_names) {
  if (mark_names.size() != h.n_f) throw SchemaError("mark name count does not match n_f");
  TrainedModel m;
  m.params = NetworkParams::zeros(h);
  m.hyper = h;
  m.mark_names = std::move(mark_names);
  return m;
}

std::string serialize_model(const TrainedModel& model) {
  model.params.check_shape(model.hyper);
  const Hyperparams& h = model.hyper;
  std::ostringstream head;
  head << kMagic << '\n'
       << "format_version=" << model.format_version << '\n'
       << "n_f=" << h.n_f << '\n'
       << "bins=" << h.bins << '\n'
       << "kernel=" << h.kernel << '\n'
       << "filters=" << h.filters << '\n'
       << "pool=" << h.pool << '\n'
       << "hidden=" << join_numbers(h.hidden) << '\n'
       << "dropout=" << format_double(h.dropout_p) << '\n'
       << "lr=" << format_double(h.lr) << '\n'
       << "epochs=" << h.epochs << '\n'
       << "batch=" << h.batch << '\n'
       << "seed=" << h.seed << '\n'
       << "marks=" << join(model.mark_names) << '\n'
       << "selected_epoch=" << model.selected_epoch << '\n'
       << "log1p=" << (model.transform.log1p ? 1 : 0) << '\n'
       << "standardize=" << (model.transform.standardize ? 1 : 0) << '\n'
       << "transform_mean=" << join_numbers(model.transform.mean) << '\n'
       << "transform_scale=" << join_numbers(model.transform.scale) << '\n'
       << "parameters=" << model.params.parameter_count() << '\n'
       << kEndHeader << '\n';

  std::string bytes = head.str();
  bytes.reserve(bytes.size() + model.params.parameter_count() * 8 + 4);
  model.params.for_each_array([&bytes](std::span<const double> a) {
    for (double v : a) put_le(bytes, std::bit_cast<std::uint64_t>(v), 8);
  });
  put_le(bytes, crc32_of(bytes.data(), bytes.size()), 4);
  return bytes;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  write_file_atomic(
      path, [&bytes](std::ostream& out) { out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); },
      true);
}

TrainedModel deserialize_model(const std::string& bytes) {
  // Header lines. The version is checked as soon as it is read so that a
  // file from another format version reports a format error, not a checksum
  // failure.
  std::map<std::string, std::string> fields;
  std::size_t pos = 0;
  std::size_t line_index = 0;
  bool closed = false;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) break;
    const std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (line_index++ == 0) {
      if (line != kMagic) throw FormatError("not a chromnet model file");
      continue;
    }
    if (line == kEndHeader) {
      closed = true;
      break;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw IntegrityError("malformed model header line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "format_version") {
      const auto version = parse_number<std::uint32_t>(key, value);
      if (version != kModelFormatVersion) {
        throw FormatError("model format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kModelFormatVersion) +
                          ")");
      }
    }
    fields[key] = value;
  }
  if (line_index == 0) throw IntegrityError("model file is empty or truncated");
  if (!closed) throw IntegrityError("model header is truncated");
  if (!fields.count("format_version")) throw FormatError("model file has no format_version");

  auto need = [&fields](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw IntegrityError("model header lacks '" + key + "'");
    return it->second;
  };

  const auto n_params = parse_number<std::size_t>("parameters", need("parameters"));
  const std::size_t expected_size = pos + n_params * 8 + 4;
  if (bytes.size() != expected_size) {
    throw IntegrityError("model file has " + std::to_string(bytes.size()) + " bytes, expected " +
                         std::to_string(expected_size));
  }
  const auto stored_crc = static_cast<std::uint32_t>(get_le(bytes.data() + bytes.size() - 4, 4));
  if (stored_crc != crc32_of(bytes.data(), bytes.size() - 4)) {
    throw IntegrityError("model checksum mismatch");
  }

  TrainedModel m;
  m.format_version = kModelFormatVersion;
  Hyperparams& h = m.hyper;
  h.n_f = parse_number<std::size_t>("n_f", need("n_f"));
  h.bins = parse_number<std::size_t>("bins", need("bins"));
  h.kernel = parse_number<std::size_t>("kernel", need("kernel"));
  h.filters = parse_number<std::size_t>("filters", need("filters"));
  h.pool = parse_number<std::size_t>("pool", need("pool"));
  h.hidden = parse_number_list<std::size_t>("hidden", need("hidden"));
  h.dropout_p = parse_number<double>("dropout", need("dropout"));
  h.lr = parse_number<double>("lr", need("lr"));
  h.epochs = parse_number<std::size_t>("epochs", need("epochs"));
  h.batch = parse_number<std::size_t>("batch", need("batch"));
  h.seed = parse_number<std::uint64_t>("seed", need("seed"));
  m.mark_names = split_list(need("marks"));
  m.selected_epoch = parse_number<std::size_t>("selected_epoch", need("selected_epoch"));
  m.transform.log1p = parse_number<int>("log1p", need("log1p")) != 0;
  m.transform.standardize = parse_number<int>("standardize", need("standardize")) != 0;
  m.transform.mean = parse_number_list<double>("transform_mean", need("transform_mean"));
  m.transform.scale = parse_number_list<double>("transform_scale", need("transform_scale"));

  try {
    h.validate();
    m.params = NetworkParams::zeros(h);
  } catch (const Error& e) {
    throw IntegrityError(std::string("model header is inconsistent: ") + e.what());
  }
  if (m.mark_names.size() != h.n_f || m.params.parameter_count() != n_params) {
    throw IntegrityError("model header is inconsistent with its parameter count");
  }
  const char* cursor = bytes.data() + pos;
  m.params.for_each_array([&cursor](std::span<double> a) {
    for (double& v : a) {
      v = std::bit_cast<double>(get_le(cursor, 8));
      cursor += 8;
    }
  });
  return m;
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace chromnet
