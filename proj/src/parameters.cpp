#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "cmdnn/io.hpp"
#include "cmdnn/predictor.hpp"
#include "cmdnn/random.hpp"

namespace cmdnn {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("malformed checkpoint: " + what);
}

}  // namespace

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::RNN: return "RNN";
    case CellKind::LSTM: return "LSTM";
    case CellKind::GRU: return "GRU";
  }
  return "?";
}

CellKind parse_cell_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "rnn") return CellKind::RNN;
  if (lower == "lstm") return CellKind::LSTM;
  if (lower == "gru") return CellKind::GRU;
  throw std::invalid_argument("unknown cell kind '" + std::string(text) + "'");
}

std::vector<TensorSpec> parameter_layout(CellKind kind, std::size_t hidden) {
  if (hidden == 0) throw std::invalid_argument("hidden size must be at least 1");
  const std::size_t h = hidden;
  std::vector<std::string> gates;
  switch (kind) {
    case CellKind::RNN: gates = {"h"}; break;
    case CellKind::LSTM: gates = {"f", "i", "C", "o"}; break;
    case CellKind::GRU: gates = {"z", "r", "n"}; break;
  }
  std::vector<TensorSpec> layout;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    layout.push_back({std::move(name), rows, cols, offset});
    offset += rows * cols;
  };
  for (const auto& g : gates) add("W_" + g, h, h + 1);
  add("W_y", 1, h);
  for (const auto& g : gates) add("b_" + g, h, 1);
  add("b_y", 1, 1);
  return layout;
}

ParameterSet::ParameterSet(CellKind kind, std::size_t hidden)
    : kind_(kind), hidden_(hidden), layout_(parameter_layout(kind, hidden)) {
  values_.assign(layout_.back().offset + layout_.back().size(), 0.0);
}

ParameterSet::ParameterSet(CellKind kind, std::size_t hidden, std::vector<double> flat)
    : ParameterSet(kind, hidden) {
  if (flat.size() != values_.size()) {
    throw std::invalid_argument("flat parameter vector has " + std::to_string(flat.size()) +
                                " entries, expected " + std::to_string(values_.size()));
  }
  values_ = std::move(flat);
}

const TensorSpec& ParameterSet::spec(std::string_view name) const {
  for (const auto& t : layout_) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("no tensor named " + std::string(name));
}

std::span<double> ParameterSet::tensor(std::string_view name) {
  const auto& t = spec(name);
  return std::span<double>(values_).subspan(t.offset, t.size());
}

std::span<const double> ParameterSet::tensor(std::string_view name) const {
  const auto& t = spec(name);
  return std::span<const double>(values_).subspan(t.offset, t.size());
}

bool ParameterSet::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string to_checkpoint(const ParameterSet& params) {
  std::string out = "cmdnn-parameters 1\n";
  out += "kind " + std::string(to_string(params.kind())) + "\n";
  out += "hidden " + std::to_string(params.hidden()) + "\n";
  for (const auto& t : params.layout()) {
    out += "tensor " + t.name + " " + std::to_string(t.rows) + " " + std::to_string(t.cols) + "\n";
    const auto values = params.tensor(t.name);
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t c = 0; c < t.cols; ++c) {
        if (c) out += ' ';
        out += io::format_double(values[r * t.cols + c]);
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

ParameterSet from_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "cmdnn-parameters" || version != 1) fail("bad header");
  std::string kind_text;
  std::size_t hidden = 0;
  if (!(in >> word >> kind_text) || word != "kind") fail("missing kind");
  if (!(in >> word >> hidden) || word != "hidden") fail("missing hidden size");

  ParameterSet params(parse_cell_kind(kind_text), hidden);
  // Tensors may appear in any order, but each must appear exactly once.
  std::vector<bool> seen(params.layout().size(), false);
  while (in >> word && word != "end") {
    if (word != "tensor") fail("unexpected token '" + word + "'");
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) fail("bad tensor header");
    const auto& spec = params.spec(name);
    if (spec.rows != rows || spec.cols != cols) fail("shape mismatch for " + name);
    const auto idx = static_cast<std::size_t>(&spec - params.layout().data());
    if (seen[idx]) fail("duplicate tensor " + name);
    seen[idx] = true;
    auto values = params.tensor(name);
    for (double& v : values) {
      std::string token;
      if (!(in >> token) || !io::parse_double(token, v)) fail("bad value in " + name);
    }
  }
  if (word != "end") fail("missing end marker");
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) fail("missing tensor");
  return params;
}

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_checkpoint(params));
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  return from_checkpoint(io::read_file(path));
}

ParameterSet init_params(CellKind kind, std::size_t hidden, std::uint64_t seed) {
  ParameterSet params(kind, hidden);
  Rng rng(seed);
  for (const auto& t : params.layout()) {
    if (t.name[0] != 'W') continue;
    const double r = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
    for (double& w : params.tensor(t.name)) w = rng.uniform(-r, r);
  }
  return params;
}

}  // namespace cmdnn
