#pragma once

#include "riskmix/estimation.hpp"
#include "riskmix/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace riskmix {

// Model documents are JSON with sorted keys and shortest round-trip float
// encoding, so save -> load -> save is byte-identical.

nlohmann::json latent_model_to_json(const LatentClassModel& model,
                                    const std::optional<Normalization>& normalization = {});
LatentClassModel latent_model_from_json(const nlohmann::json& j,
                                        std::optional<Normalization>* normalization = nullptr);

nlohmann::json gaussian_model_to_json(const GaussianFrailtyModel& model,
                                      const std::optional<Normalization>& normalization = {});
GaussianFrailtyModel gaussian_model_from_json(const nlohmann::json& j,
                                              std::optional<Normalization>* normalization = nullptr);

nlohmann::json error_bars_to_json(const ErrorBarReport& report);
nlohmann::json fit_report_to_json(const FitReport& report, std::uint64_t seed,
                                  const std::optional<Normalization>& normalization = {});
nlohmann::json selection_report_to_json(const SelectionReport& report, std::uint64_t seed,
                                        const std::optional<Normalization>& normalization = {});

// Kind-dispatching load; throws std::invalid_argument on schema violations.
ModelKind model_kind_from_json(const nlohmann::json& j);

std::string dump_json(const nlohmann::json& j);

// FNV-1a 64-bit over the canonical dump, as a fixed-width hex string.
std::string model_hash(const nlohmann::json& j);

// Write via a temporary file in the same directory plus rename, so failed
// commands leave no partial output.
void atomic_write_file(const std::string& path, const std::string& content);

nlohmann::json load_json_file(const std::string& path);

}  // namespace riskmix
