// Copyright 2026 The MPKM Authors. All Rights Reserved.
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

#include "mpkm/model_io.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mpkm::io {

using nlohmann::json;

namespace {

json format_to_json(const fx::FixedPointFormat& f) {
  return json{{"word_bits", f.word_bits}, {"frac_bits", f.frac_bits}};
}

fx::FixedPointFormat format_from_json(const json& j) {
  fx::FixedPointFormat f;
  f.word_bits = j.at("word_bits").get<int>();
  f.frac_bits = j.at("frac_bits").get<int>();
  fx::validate(f);
  return f;
}

}  // namespace

std::string model_to_json(const km::TrainedModel& m) {
  const auto& c = m.bank.config;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["bank"] = {
      {"config",
       {{"total_filters", c.total_filters},
        {"filters_per_octave", c.filters_per_octave},
        {"num_octaves", c.num_octaves},
        {"bp_taps", c.bp_taps},
        {"lp_taps", c.lp_taps},
        {"base_sample_rate", c.base_sample_rate},
        {"greenwood",
         {{"scale", c.greenwood.scale},
          {"slope", c.greenwood.slope},
          {"offset", c.greenwood.offset}}},
        {"freq_low", c.freq_low},
        {"freq_high", c.freq_high}}},
      {"center_freqs", m.bank.center_freqs},
      {"band_low", m.bank.band_low},
      {"band_high", m.bank.band_high},
      {"octave_of", m.bank.octave_of},
      {"bp_coeffs", m.bank.bp_coeffs},
      {"lp_coeffs", m.bank.lp_coeffs},
  };
  j["stats"] = {{"mu", m.stats.mu}, {"sigma", m.stats.sigma}};
  j["weights"] = {{"w_plus", m.w_plus},
                  {"w_minus", m.w_minus},
                  {"b_plus", m.b_plus},
                  {"b_minus", m.b_minus}};
  j["gamma1"] = m.gamma1;
  j["gamma_n"] = m.gamma_n;
  j["gamma_f"] = m.gamma_f;
  if (m.quant) {
    j["quant"] = {{"storage", format_to_json(m.quant->storage)},
                  {"datapath", format_to_json(m.quant->datapath)}};
  } else {
    j["quant"] = nullptr;
  }
  return j.dump(2) + "\n";
}

km::TrainedModel model_from_json(const std::string& text) {
  const json j = json::parse(text);
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion)
    throw std::runtime_error("model file: unsupported schema version " +
                             std::to_string(version));
  km::TrainedModel m;
  const json& bank = j.at("bank");
  const json& cfg = bank.at("config");
  auto& c = m.bank.config;
  c.total_filters = cfg.at("total_filters").get<int>();
  c.filters_per_octave = cfg.at("filters_per_octave").get<int>();
  c.num_octaves = cfg.at("num_octaves").get<int>();
  c.bp_taps = cfg.at("bp_taps").get<int>();
  c.lp_taps = cfg.at("lp_taps").get<int>();
  c.base_sample_rate = cfg.at("base_sample_rate").get<double>();
  c.greenwood.scale = cfg.at("greenwood").at("scale").get<double>();
  c.greenwood.slope = cfg.at("greenwood").at("slope").get<double>();
  c.greenwood.offset = cfg.at("greenwood").at("offset").get<double>();
  c.freq_low = cfg.at("freq_low").get<double>();
  c.freq_high = cfg.at("freq_high").get<double>();

  bank.at("center_freqs").get_to(m.bank.center_freqs);
  bank.at("band_low").get_to(m.bank.band_low);
  bank.at("band_high").get_to(m.bank.band_high);
  bank.at("octave_of").get_to(m.bank.octave_of);
  bank.at("bp_coeffs").get_to(m.bank.bp_coeffs);
  bank.at("lp_coeffs").get_to(m.bank.lp_coeffs);

  j.at("stats").at("mu").get_to(m.stats.mu);
  j.at("stats").at("sigma").get_to(m.stats.sigma);
  j.at("weights").at("w_plus").get_to(m.w_plus);
  j.at("weights").at("w_minus").get_to(m.w_minus);
  m.b_plus = j.at("weights").at("b_plus").get<double>();
  m.b_minus = j.at("weights").at("b_minus").get<double>();
  m.gamma1 = j.at("gamma1").get<double>();
  m.gamma_n = j.at("gamma_n").get<double>();
  m.gamma_f = j.at("gamma_f").get<double>();
  if (!j.at("quant").is_null()) {
    fx::QuantInfo q;
    q.storage = format_from_json(j.at("quant").at("storage"));
    q.datapath = format_from_json(j.at("quant").at("datapath"));
    m.quant = q;
  }
  return m;
}

void save_model(const km::TrainedModel& model,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model);
}

km::TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace mpkm::io
