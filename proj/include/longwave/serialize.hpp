#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "longwave/estimator.hpp"
#include "longwave/simulate.hpp"
#include "longwave/version.hpp"

namespace longwave {

inline nlohmann::ordered_json fit_to_json(const AdditiveFit& fit) {
  nlohmann::ordered_json doc;
  doc["format"] = "longwave-fit";
  doc["format_version"] = 1;
  doc["intercept"] = fit.intercept;
  doc["meta"] = {
      {"n", fit.meta.n},
      {"r", fit.meta.r},
      {"regime",
       fit.meta.regime == ThresholdKind::homoskedastic ? "homoskedastic"
                                                       : "heteroskedastic"},
      {"alpha", fit.meta.alpha ? nlohmann::ordered_json(*fit.meta.alpha)
                               : nlohmann::ordered_json(nullptr)},
      {"levels", fit.meta.levels},
      {"vanishing_moments", fit.meta.vanishing_moments},
      {"table_depth", fit.meta.table_depth},
  };
  doc["components"] = nlohmann::ordered_json::array();
  for (const auto& comp : fit.components) {
    nlohmann::ordered_json c;
    c["component"] = comp.component;
    c["max_level"] = comp.max_level;
    c["theta00"] = comp.theta00;
    c["centering"] = comp.centering;
    c["gamma"] = comp.gamma;
    c["gamma1"] = comp.gamma1;
    c["coefficients"] = nlohmann::ordered_json::array();
    for (const auto& e : comp.entries) {
      c["coefficients"].push_back({{"j", e.j},
                                   {"k", e.k},
                                   {"value", e.value},
                                   {"threshold", e.threshold},
                                   {"kept", e.kept}});
    }
    doc["components"].push_back(std::move(c));
  }
  doc["provenance"] = {{"version", kVersion}};
  return doc;
}

inline AdditiveFit fit_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "longwave-fit")
    throw DataError("not a longwave fit document");
  if (doc.value("format_version", 0) != 1)
    throw DataError("unsupported fit format version");
  AdditiveFit fit;
  const auto& meta = doc.at("meta");
  fit.meta.n = meta.at("n").get<std::int64_t>();
  fit.meta.r = meta.at("r").get<std::int64_t>();
  fit.meta.regime = meta.at("regime").get<std::string>() == "heteroskedastic"
                        ? ThresholdKind::heteroskedastic
                        : ThresholdKind::homoskedastic;
  if (!meta.at("alpha").is_null()) fit.meta.alpha = meta.at("alpha").get<double>();
  fit.meta.levels = meta.at("levels").get<std::vector<int>>();
  fit.meta.vanishing_moments = meta.at("vanishing_moments").get<int>();
  fit.meta.table_depth = meta.at("table_depth").get<int>();
  fit.basis = std::make_shared<const WaveletBasis>(
      build_basis(fit.meta.vanishing_moments, fit.meta.table_depth));
  fit.intercept = doc.at("intercept").get<double>();
  for (const auto& c : doc.at("components")) {
    CoefficientSet comp;
    comp.component = c.at("component").get<std::int64_t>();
    comp.max_level = c.at("max_level").get<int>();
    comp.theta00 = c.at("theta00").get<double>();
    comp.centering = c.at("centering").get<double>();
    comp.gamma = c.at("gamma").get<double>();
    comp.gamma1 = c.at("gamma1").get<double>();
    for (const auto& e : c.at("coefficients")) {
      CoeffEntry entry;
      entry.j = e.at("j").get<int>();
      entry.k = e.at("k").get<std::int64_t>();
      entry.value = e.at("value").get<double>();
      entry.threshold = e.at("threshold").get<double>();
      entry.kept = e.at("kept").get<bool>();
      comp.entries.push_back(entry);
    }
    fit.components.push_back(std::move(comp));
  }
  return fit;
}

inline nlohmann::ordered_json report_to_json(const MiseReport& report) {
  nlohmann::ordered_json doc;
  doc["format"] = "longwave-mise-report";
  doc["format_version"] = 1;
  doc["provenance"] = {{"version", report.version},
                       {"seed", report.seed},
                       {"config_hash", report.config_hash},
                       {"wall_seconds", report.wall_seconds},
                       {"complete", report.complete}};
  doc["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    doc["cells"].push_back({{"sigma_id", c.sigma_id},
                            {"snr_db", c.snr_db},
                            {"alpha", c.alpha},
                            {"mean_mise", c.mean_mise},
                            {"se", std::isnan(c.se) ? nlohmann::ordered_json(nullptr)
                                                    : nlohmann::ordered_json(c.se)},
                            {"n_reps", c.n_reps},
                            {"mean_obs_mise", c.mean_obs_mise},
                            {"circulant_fallbacks", c.fallback_count}});
  }
  return doc;
}

inline SimulationConfig config_from_json(const nlohmann::json& doc) {
  toml::Table table;
  for (const auto& [key, value] : doc.items()) {
    toml::Value v;
    if (value.is_boolean()) v.data = value.get<bool>();
    else if (value.is_number_integer() || value.is_number_unsigned())
      v.data = value.get<std::int64_t>();
    else if (value.is_number_float()) v.data = value.get<double>();
    else if (value.is_string()) v.data = value.get<std::string>();
    else if (value.is_array()) {
      std::vector<toml::Value> items;
      for (const auto& item : value) {
        toml::Value iv;
        if (item.is_boolean()) iv.data = item.get<bool>();
        else if (item.is_number_integer() || item.is_number_unsigned())
          iv.data = item.get<std::int64_t>();
        else if (item.is_number_float()) iv.data = item.get<double>();
        else if (item.is_string()) iv.data = item.get<std::string>();
        else throw ConfigError("unsupported array element in config key '" + key + "'");
        items.push_back(std::move(iv));
      }
      v.data = std::move(items);
    } else {
      throw ConfigError("unsupported value type for config key '" + key + "'");
    }
    table[key] = std::move(v);
  }
  return config_from_toml(table);
}

/// Load a simulation config from a TOML (default) or JSON file.
inline SimulationConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i < text.size() && text[i] == '{') {
    try {
      return config_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed JSON config: " + std::string(e.what()));
    }
  }
  return config_from_toml(toml::parse(text));
}

}  // namespace longwave
