#pragma once

// The document consumed by the trajectory explorer. Field names and nesting
// are frozen in schema/export-ui.schema.json.

#include <vector>

#include <json.hpp>

#include "samdp/embedding.hpp"
#include "samdp/model_select.hpp"
#include "samdp/samdp_core.hpp"
#include "samdp/st_cluster.hpp"
#include "samdp/trajectory_store.hpp"

namespace samdp {

inline constexpr int kExportVersion = 1;

// `embedding` holds the display coordinates (one row per record); `grid` may
// be empty when no selection was run.
nlohmann::json export_document(const TrajectoryDataset& ds, const FeatureMatrix& embedding,
                               const Clustering& clustering, const SamdpModel& model,
                               const std::vector<GridReportRow>& grid);

}  // namespace samdp
