#include "gdnn/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gdnn/error.hpp"

namespace gdnn {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string expect_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string("checkpoint truncated before ") + what);
  return line;
}

std::vector<std::string> split_words(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> words;
  for (std::string w; ss >> w;) words.push_back(w);
  return words;
}

template <typename T>
T to_number(const std::string& s, const char* what, int base = 10) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value, base);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(std::string("checkpoint: bad ") + what + " '" + s + "'");
  }
  return value;
}

}  // namespace

const Matrix& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, m] : arrays) {
    if (n == name) return m;
  }
  throw DataError("checkpoint has no array named " + name);
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << "GDNN1\n"
      << "version " << ckpt.version << '\n'
      << "fingerprint " << hex64(ckpt.fingerprint) << '\n'
      << "targets " << ckpt.targets.size() << ' ';
  for (std::size_t i = 0; i < ckpt.targets.size(); ++i) {
    if (i) out << ',';
    out << ckpt.targets[i];
  }
  out << '\n' << "config " << ckpt.config_text.size() << '\n' << ckpt.config_text << '\n';
  out << "arrays " << ckpt.arrays.size() << '\n';
  std::size_t offset = 0;
  for (const auto& [name, m] : ckpt.arrays) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw DataError("checkpoint array name '" + name + "' must be a single word");
    }
    out << name << ' ' << m.rows() << ' ' << m.cols() << ' ' << offset << '\n';
    offset += m.size() * sizeof(double);
  }
  out << "payload\n";
  std::vector<char> buf;
  for (const auto& [name, m] : ckpt.arrays) {
    buf.resize(m.size() * 8);
    for (std::size_t k = 0; k < m.size(); ++k) {
      const auto bits = std::bit_cast<std::uint64_t>(m.data()[k]);
      for (int b = 0; b < 8; ++b) buf[8 * k + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw DataError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  if (expect_line(in, "magic") != "GDNN1") throw DataError("not a GDNN1 container");
  Checkpoint ckpt;
  auto words = split_words(expect_line(in, "version"));
  if (words.size() != 2 || words[0] != "version") throw DataError("checkpoint: bad version line");
  ckpt.version = to_number<int>(words[1], "version");
  if (ckpt.version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + words[1]);
  }
  words = split_words(expect_line(in, "fingerprint"));
  if (words.size() != 2 || words[0] != "fingerprint") throw DataError("checkpoint: bad fingerprint line");
  ckpt.fingerprint = to_number<std::uint64_t>(words[1], "fingerprint", 16);

  words = split_words(expect_line(in, "targets"));
  if (words.empty() || words[0] != "targets" || words.size() > 3) {
    throw DataError("checkpoint: bad targets line");
  }
  const auto target_count = to_number<std::size_t>(words.at(1), "target count");
  if (words.size() == 3) {
    std::stringstream ts(words[2]);
    for (std::string item; std::getline(ts, item, ',');) {
      ckpt.targets.push_back(to_number<NodeId>(item, "target id"));
    }
  }
  if (ckpt.targets.size() != target_count) throw DataError("checkpoint: target count mismatch");

  words = split_words(expect_line(in, "config"));
  if (words.size() != 2 || words[0] != "config") throw DataError("checkpoint: bad config line");
  ckpt.config_text.resize(to_number<std::size_t>(words[1], "config size"));
  in.read(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  if (!in || in.get() != '\n') throw DataError("checkpoint: truncated config block");

  words = split_words(expect_line(in, "arrays"));
  if (words.size() != 2 || words[0] != "arrays") throw DataError("checkpoint: bad arrays line");
  const auto count = to_number<std::size_t>(words[1], "array count");
  std::vector<std::pair<std::string, std::size_t>> offsets;
  for (std::size_t a = 0; a < count; ++a) {
    words = split_words(expect_line(in, "manifest"));
    if (words.size() != 4) throw DataError("checkpoint: bad manifest entry");
    const auto rows = to_number<std::size_t>(words[1], "row count");
    const auto cols = to_number<std::size_t>(words[2], "column count");
    offsets.emplace_back(words[0], to_number<std::size_t>(words[3], "offset"));
    ckpt.arrays.emplace_back(words[0], Matrix(rows, cols));
  }
  if (expect_line(in, "payload") != "payload") throw DataError("checkpoint: missing payload marker");

  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t expected = 0;
  for (std::size_t a = 0; a < count; ++a) {
    auto& m = ckpt.arrays[a].second;
    const std::size_t off = offsets[a].second;
    if (off != expected || off + m.size() * 8 > payload.size()) {
      throw DataError("checkpoint: array " + offsets[a].first + " has an inconsistent offset");
    }
    for (std::size_t k = 0; k < m.size(); ++k) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[off + 8 * k + b])) << (8 * b);
      }
      m.data()[k] = std::bit_cast<double>(bits);
    }
    expected = off + m.size() * 8;
  }
  if (expected != payload.size()) throw DataError("checkpoint: trailing bytes after payload");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

void store_params(Checkpoint& ckpt, const ParamStore& params) {
  for (std::size_t k = 0; k < params.count(); ++k) {
    ckpt.arrays.emplace_back(params.names()[k], params.param_at(k));
  }
}

void restore_params(const Checkpoint& ckpt, ParamStore& params) {
  for (std::size_t k = 0; k < params.count(); ++k) {
    const Matrix& saved = ckpt.array(params.names()[k]);
    if (!saved.same_shape(params.param_at(k))) {
      throw DataError("checkpoint array " + params.names()[k] + " is " + saved.shape_string() +
                      ", model expects " + params.param_at(k).shape_string());
    }
    params.param_at(k) = saved;
  }
}

void require_fingerprint(const Checkpoint& ckpt, const Graph& g) {
  if (ckpt.fingerprint != g.fingerprint()) {
    throw DataError("checkpoint fingerprint " + hex64(ckpt.fingerprint) +
                    " does not match the training graph (" + hex64(g.fingerprint()) + ")");
  }
}

void save_features_binary(const std::filesystem::path& path, const FeatureMatrix& features,
                          std::uint64_t fingerprint) {
  Checkpoint c;
  c.fingerprint = fingerprint;
  c.targets = features.targets;
  c.config_text = "sentinel = " + format_real(features.unreachable_sentinel) +
                  "\nstandardized = " + (features.standardized ? "true" : "false");
  c.arrays.emplace_back("features", features.data);
  save_checkpoint(path, c);
}

FeatureMatrix load_features_binary(const std::filesystem::path& path) {
  const auto c = load_checkpoint(path);
  FeatureMatrix f;
  f.data = c.array("features");
  f.targets = c.targets;
  std::istringstream meta(c.config_text);
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 3);
    if (key == "sentinel") {
      f.unreachable_sentinel = std::stod(value);
    } else if (key == "standardized") {
      f.standardized = value == "true";
    }
  }
  return f;
}

}  // namespace gdnn
