#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "samdp/errors.hpp"
#include "samdp/export_ui.hpp"
#include "samdp/gridworld.hpp"
#include "schema_check.hpp"

using namespace samdp;

namespace {

nlohmann::json load_schema() {
  std::ifstream in(std::string(SAMDP_SCHEMA_DIR) + "/export-ui.schema.json");
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

struct Exported {
  TrajectoryDataset ds;
  Candidate selected;
  std::vector<GridReportRow> rows;
  nlohmann::json doc;
};

Exported gridworld_export() {
  auto cfg = gridworld::load_maze(fixtures::maze_path("maze_a.txt"));
  cfg.seed = 12;
  auto ds = gridworld::generate(cfg, 20, 0.0);
  auto emb = feature_matrix(ds);
  auto x = assemble(emb, ds);
  GridSpec g;
  g.k_min = 10;
  g.k_max = 12;
  g.w_min = 1;
  g.w_max = 2;
  auto set = grid_search(ds, x, g);
  const auto pick = select(set).index;
  auto rows = report_rows(set, pick);
  auto sel = set.candidates[pick];
  auto doc = export_document(ds, emb, sel.clustering, sel.model, rows);
  return {ds, sel, rows, doc};
}

}  // namespace

TEST_CASE("export document conforms to the schema") {
  const auto schema = load_schema();
  auto e = gridworld_export();
  CHECK(fixtures::schema_errors(e.doc, schema).empty());

  CHECK(e.doc["records"].size() == e.ds.size());
  CHECK(e.doc["clusters"].size() == static_cast<std::size_t>(e.selected.K));
  CHECK(e.doc["model"]["P"].size() == static_cast<std::size_t>(e.selected.K));
  CHECK(e.doc["grid_report"].size() == e.rows.size());
  for (std::size_t i = 0; i < e.ds.size(); i += 37) {
    const auto& r = e.doc["records"][i];
    CHECK(r["traj_id"] == e.ds[i].traj_id);
    CHECK(r["t"] == e.ds[i].t);
    CHECK(r["reward"].get<double>() == e.ds[i].reward);
    CHECK(r["value"].get<double>() == e.ds[i].value_estimate);
    CHECK(r["cluster"] == e.selected.clustering.assignment[i]);
  }

  SUBCASE("missing P is reported by name") {
    auto broken = e.doc;
    broken["model"].erase("P");
    auto errors = fixtures::schema_errors(broken, schema);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].find("'P'") != std::string::npos);
  }
  SUBCASE("unexpected and mistyped fields are rejected") {
    auto broken = e.doc;
    broken["records"][0]["cluster"] = "three";
    broken["extra"] = 1;
    CHECK(fixtures::schema_errors(broken, schema).size() == 2);
  }
  SUBCASE("dumped text parses back to the same document") {
    CHECK(nlohmann::json::parse(e.doc.dump()) == e.doc);
  }
}

TEST_CASE("export rejects mismatched inputs") {
  auto planted = fixtures::planted_chain(3, 3, 4, 1);
  auto c = st_kmeans(planted.features, planted.ds, 3, 1, 0);
  auto m = infer(identify_skills(c.assignment, 3, planted.ds), 3, planted.ds, 0.9);
  CHECK_THROWS_AS(export_document(planted.ds, planted.features.topRows(3), c, m, {}), DimensionError);
  auto other = m;
  other.K = 4;
  CHECK_THROWS_AS(export_document(planted.ds, planted.features, c, other, {}), DimensionError);
  CHECK(fixtures::schema_errors(export_document(planted.ds, planted.features, c, m, {}), load_schema()).empty());
}
