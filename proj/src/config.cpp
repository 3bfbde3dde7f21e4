// Copyright 2026 The corrstruct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "corrstruct/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "corrstruct/csv.hpp"
#include "corrstruct/error.hpp"

namespace corrstruct {

namespace {

struct Value {
  std::string text;
  bool quoted = false;
  std::size_t line = 0;
};

[[noreturn]] void bad(const Value& v, const std::string& what) {
  throw Error(ErrorCode::kParseError, "config line " + std::to_string(v.line) + ": " + what);
}

int as_int(const Value& v) {
  int out = 0;
  const auto res = std::from_chars(v.text.data(), v.text.data() + v.text.size(), out);
  if (v.quoted || res.ec != std::errc() || res.ptr != v.text.data() + v.text.size()) {
    bad(v, "expected an integer, got '" + v.text + "'");
  }
  return out;
}

double as_double(const Value& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.text.data(), v.text.data() + v.text.size(), out);
  if (v.quoted || res.ec != std::errc() || res.ptr != v.text.data() + v.text.size()) {
    bad(v, "expected a number, got '" + v.text + "'");
  }
  return out;
}

bool as_bool(const Value& v) {
  if (!v.quoted && v.text == "true") return true;
  if (!v.quoted && v.text == "false") return false;
  bad(v, "expected true or false, got '" + v.text + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

using Setter = std::function<void(PipelineConfig&, const Value&)>;

void add_grid(std::map<std::string, Setter>& t, const std::string& sec, GridSpec PipelineConfig::*g) {
  t[sec + ".image_w"] = [g](PipelineConfig& c, const Value& v) { (c.*g).image_w = as_int(v); };
  t[sec + ".image_h"] = [g](PipelineConfig& c, const Value& v) { (c.*g).image_h = as_int(v); };
  t[sec + ".patch_w"] = [g](PipelineConfig& c, const Value& v) { (c.*g).patch_w = as_int(v); };
  t[sec + ".patch_h"] = [g](PipelineConfig& c, const Value& v) { (c.*g).patch_h = as_int(v); };
  t[sec + ".stride_x"] = [g](PipelineConfig& c, const Value& v) { (c.*g).stride_x = as_int(v); };
  t[sec + ".stride_y"] = [g](PipelineConfig& c, const Value& v) { (c.*g).stride_y = as_int(v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    add_grid(t, "probe_grid", &PipelineConfig::probe_grid);
    add_grid(t, "gallery_grid", &PipelineConfig::gallery_grid);
    t["features.color_space"] = [](PipelineConfig& c, const Value& v) {
      if (v.text == "lab") c.features.color_space = ColorSpace::kLab;
      else if (v.text == "hsv") c.features.color_space = ColorSpace::kHsv;
      else bad(v, "color_space must be lab or hsv");
    };
    t["features.bins_per_channel"] = [](PipelineConfig& c, const Value& v) { c.features.bins_per_channel = as_int(v); };
    t["features.grad_orient_bins"] = [](PipelineConfig& c, const Value& v) { c.features.grad_orient_bins = as_int(v); };
    t["features.grad_cells_x"] = [](PipelineConfig& c, const Value& v) { c.features.grad_cells_x = as_int(v); };
    t["features.grad_cells_y"] = [](PipelineConfig& c, const Value& v) { c.features.grad_cells_y = as_int(v); };
    t["features.pca_dim"] = [](PipelineConfig& c, const Value& v) {
      const int d = as_int(v);
      c.features.pca_dim = d > 0 ? std::optional<int>(d) : std::nullopt;
    };
    t["metric.mode"] = [](PipelineConfig& c, const Value& v) {
      if (v.text == "shared") c.metric.mode = MetricMode::kShared;
      else if (v.text == "per_location") c.metric.mode = MetricMode::kPerLocation;
      else bad(v, "metric mode must be shared or per_location");
    };
    t["metric.ridge"] = [](PipelineConfig& c, const Value& v) {
      c.metric.ridge = v.text == "auto" ? std::nullopt : std::optional<double>(as_double(v));
    };
    t["metric.dissimilar_factor"] = [](PipelineConfig& c, const Value& v) { c.metric.dissimilar_factor = as_int(v); };
    t["learn.epsilon"] = [](PipelineConfig& c, const Value& v) { c.learn.epsilon = as_double(v); };
    t["learn.n_cmc"] = [](PipelineConfig& c, const Value& v) { c.learn.n_cmc = as_int(v); };
    t["learn.structures_per_iter"] = [](PipelineConfig& c, const Value& v) { c.learn.structures_per_iter = as_int(v); };
    t["learn.range_min"] = [](PipelineConfig& c, const Value& v) { c.learn.range_min = as_int(v); };
    t["learn.range_max"] = [](PipelineConfig& c, const Value& v) { c.learn.range_max = as_int(v); };
    t["learn.max_iters"] = [](PipelineConfig& c, const Value& v) { c.learn.max_iters = as_int(v); };
    t["learn.use_eval_module"] = [](PipelineConfig& c, const Value& v) { c.learn.use_eval_module = as_bool(v); };
    t["learn.t_c"] = [](PipelineConfig& c, const Value& v) { c.learn.t_c = as_double(v); };
    t["learn.t_d"] = [](PipelineConfig& c, const Value& v) { c.learn.t_d = as_int(v); };
    t["learn.stall_iters"] = [](PipelineConfig& c, const Value& v) { c.learn.stall_iters = as_int(v); };
    t["learn.link_subsample"] = [](PipelineConfig& c, const Value& v) { c.learn.link_subsample = as_int(v); };
    t["learn.joint_normalization"] = [](PipelineConfig& c, const Value& v) { c.learn.joint_normalization = as_bool(v); };
    t["multi.mode"] = [](PipelineConfig& c, const Value& v) {
      if (v.text == "off") c.multi.mode = MultiMode::kOff;
      else if (v.text == "manual") c.multi.mode = MultiMode::kManual;
      else if (v.text == "auto") c.multi.mode = MultiMode::kAuto;
      else bad(v, "multi mode must be off, manual or auto");
    };
    t["multi.k_max"] = [](PipelineConfig& c, const Value& v) { c.multi.k_max = as_int(v); };
    t["multi.min_pairs"] = [](PipelineConfig& c, const Value& v) { c.multi.min_pairs = as_int(v); };
    t["multi.confidence_percentile"] = [](PipelineConfig& c, const Value& v) { c.multi.confidence_percentile = as_double(v); };
    t["protocol.splits"] = [](PipelineConfig& c, const Value& v) { c.protocol.splits = as_int(v); };
    t["protocol.fraction"] = [](PipelineConfig& c, const Value& v) { c.protocol.fraction = as_double(v); };
    return t;
  }();
  return table;
}

void dump_grid(std::ostringstream& out, const char* name, const GridSpec& g) {
  out << '[' << name << "]\n"
      << "image_w = " << g.image_w << "\nimage_h = " << g.image_h << "\npatch_w = " << g.patch_w
      << "\npatch_h = " << g.patch_h << "\nstride_x = " << g.stride_x
      << "\nstride_y = " << g.stride_y << "\n\n";
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

void PipelineConfig::validate() const {
  probe_grid.validate();
  gallery_grid.validate();
  if (probe_grid.image_w != gallery_grid.image_w || probe_grid.image_h != gallery_grid.image_h) {
    throw Error(ErrorCode::kInvalidSpec, "probe and gallery grids must share the image size");
  }
  features.validate();
  learn.validate();
  if (metric.dissimilar_factor < 1) throw Error(ErrorCode::kInvalidSpec, "dissimilar_factor must be >= 1");
  if (metric.ridge && !(*metric.ridge >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "ridge must be >= 0");
  if (multi.k_max < 1 || multi.min_pairs < 1) throw Error(ErrorCode::kInvalidSpec, "k_max and min_pairs must be >= 1");
  if (!(multi.confidence_percentile >= 0.0 && multi.confidence_percentile <= 100.0)) {
    throw Error(ErrorCode::kInvalidSpec, "confidence_percentile must lie in [0, 100]");
  }
  if (protocol.splits < 1) throw Error(ErrorCode::kInvalidSpec, "splits must be >= 1");
  if (!(protocol.fraction > 0.0 && protocol.fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidSpec, "fraction must lie in (0, 1)");
  }
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    // Strip comments outside quotes.
    bool in_quotes = false;
    std::string line;
    for (char ch : raw) {
      if (ch == '"') in_quotes = !in_quotes;
      if (ch == '#' && !in_quotes) break;
      line += ch;
    }
    line = trim(line);
    if (line.empty()) continue;
    const Value here{line, false, line_no};
    if (line.front() == '[') {
      if (line.back() != ']') bad(here, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad(here, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    Value value{trim(line.substr(eq + 1)), false, line_no};
    if (value.text.size() >= 2 && value.text.front() == '"' && value.text.back() == '"') {
      value.text = value.text.substr(1, value.text.size() - 2);
      value.quoted = true;
    }
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) bad(here, "unknown setting '" + full + "'");
    it->second(cfg, value);
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  dump_grid(out, "probe_grid", cfg.probe_grid);
  dump_grid(out, "gallery_grid", cfg.gallery_grid);
  const auto& f = cfg.features;
  out << "[features]\ncolor_space = \"" << (f.color_space == ColorSpace::kLab ? "lab" : "hsv")
      << "\"\nbins_per_channel = " << f.bins_per_channel
      << "\ngrad_orient_bins = " << f.grad_orient_bins << "\ngrad_cells_x = " << f.grad_cells_x
      << "\ngrad_cells_y = " << f.grad_cells_y << "\npca_dim = " << f.pca_dim.value_or(0)
      << "\n\n";
  const auto& m = cfg.metric;
  out << "[metric]\nmode = \"" << (m.mode == MetricMode::kShared ? "shared" : "per_location")
      << "\"\nridge = " << (m.ridge ? format_double(*m.ridge) : std::string("\"auto\""))
      << "\ndissimilar_factor = " << m.dissimilar_factor << "\n\n";
  const auto& l = cfg.learn;
  out << "[learn]\nepsilon = " << format_double(l.epsilon) << "\nn_cmc = " << l.n_cmc
      << "\nstructures_per_iter = " << l.structures_per_iter << "\nrange_min = " << l.range_min
      << "\nrange_max = " << l.range_max << "\nmax_iters = " << l.max_iters
      << "\nuse_eval_module = " << bool_text(l.use_eval_module)
      << "\nt_c = " << format_double(l.t_c) << "\nt_d = " << l.t_d
      << "\nstall_iters = " << l.stall_iters << "\nlink_subsample = " << l.link_subsample
      << "\njoint_normalization = " << bool_text(l.joint_normalization) << "\n\n";
  const char* mode = cfg.multi.mode == MultiMode::kOff      ? "off"
                     : cfg.multi.mode == MultiMode::kManual ? "manual"
                                                            : "auto";
  out << "[multi]\nmode = \"" << mode << "\"\nk_max = " << cfg.multi.k_max
      << "\nmin_pairs = " << cfg.multi.min_pairs
      << "\nconfidence_percentile = " << format_double(cfg.multi.confidence_percentile) << "\n\n";
  out << "[protocol]\nsplits = " << cfg.protocol.splits
      << "\nfraction = " << format_double(cfg.protocol.fraction) << '\n';
  return out.str();
}

}  // namespace corrstruct
