#pragma once

#include "dichlab/admissibility.hpp"
#include "dichlab/errors.hpp"
#include "dichlab/planted.hpp"
#include "dichlab/robustness.hpp"
#include "dichlab/splitting.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace dichlab {

using Json = nlohmann::ordered_json;

/// Finite doubles as numbers; inf, -inf and nan as strings.
Json num(double v);
/// Inverse of num(); accepts numbers and the three strings.
double to_double(const Json& j, const std::string& path);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& path);

/// {domain, dim, window: [first, last], matrices: [{n, rows, log_scale?}]}
Json system_to_json(const LinearSystem& sys);
LinearSystem system_from_json(const Json& j, const std::string& path = "system");

Json projections_to_json(const ProjectionFamily& proj);
ProjectionFamily projections_from_json(const Json& j, const std::string& path = "projections");
/// System plus projections, certificate and similarity family for replay.
Json planted_to_json(const PlantedModel& pm);

/// {kind, domain, window, scale?, two_sided_extension?, table?: [{index, log_value}]}
GrowthRate rate_from_json(const Json& j, const std::string& path = "rate");
Json rate_to_json(const GrowthRate& rate);
/// {kind: uniform, constant?} | {kind: power, epsilon} | {kind: table, table}
NuSequence nu_from_json(const Json& j, const GrowthRate& rate, const std::string& path = "nu");

Json to_json(const DichotomyCertificate& c);
Json to_json(const DichotomyLedger& l);
Json to_json(const SplittingReport& r);
Json to_json(const GreenBoundReport& g);
Json to_json(const CharacterizeResult& r);
Json to_json(const SolveReport& r);
Json to_json(const OperatorNormReport& r);
Json to_json(const UniquenessReport& r);
Json to_json(const MarginReport& m);
Json to_json(const NeumannCheck& n);
Json to_json(const PersistenceReport& r);
Json to_json(const SZeroBetaCheck& s);
Json to_json(const MunuCheck& m);

/// Shortest text that reads back to the same double; inf/nan spelled out.
std::string format_number(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::string str() const;
};

CsvTable counterexample_table(const std::vector<CounterexampleRow>& rows);
CsvTable slack_table(const DichotomyLedger& ledger);
CsvTable split_table(const SplittingReport& rep);
CsvTable sweep_table(const std::vector<SweepRow>& rows);

/// Writes to a temporary sibling and renames it into place.
void atomic_write(const std::string& path, const std::string& content);

/// The embedded schemas (draft-07 subset).
const Json& config_schema();
const Json& report_schema();

/// Validates against the keywords type, enum, const, properties, required,
/// additionalProperties, items, minItems, maxItems, minimum, maximum,
/// exclusiveMinimum, oneOf and local $ref. Returns field-path messages.
std::vector<std::string> validate(const Json& instance, const Json& schema);

}  // namespace dichlab
