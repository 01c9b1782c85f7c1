#pragma once

// PROV-JSON export and import. Node and relation attributes beyond the
// standard ones live under the "pt" prefix; per-step records ride along in
// the top-level "pt:opRecords" array so that a round trip restores the whole
// graph. Keys are emitted sorted, which makes the output byte-stable.

#include <string>

#include <json.hpp>

#include "provtrack/graph.hpp"

namespace provtrack {

inline constexpr const char* kPtNamespace = "urn:provtrack:";

namespace provjson {

inline const char* section(RelationKind k) { return relation_kind_name(k); }

inline std::pair<const char*, const char*> roles(RelationKind k) {
  switch (k) {
    case RelationKind::used: return {"prov:activity", "prov:entity"};
    case RelationKind::was_generated_by: return {"prov:entity", "prov:activity"};
    case RelationKind::was_derived_from: return {"prov:generatedEntity", "prov:usedEntity"};
    case RelationKind::was_invalidated_by: return {"prov:entity", "prov:activity"};
  }
  return {"", ""};
}

}  // namespace provjson

inline nlohmann::json to_prov_json(const ProvGraph& g) {
  using nlohmann::json;
  json doc = json::object();
  doc["prefix"] = {{"pt", kPtNamespace}, {"e", std::string(kPtNamespace) + "entity:"},
                   {"a", std::string(kPtNamespace) + "activity:"}};
  json ent = json::object();
  for (const auto& e : g.entities()) {
    ent[e.id] = {{"pt:op_seq", e.op_seq}, {"pt:row", e.row}, {"pt:feature", e.feature}, {"pt:value", logfmt::value_json(e.value)}};
  }
  json act = json::object();
  for (const auto& a : g.activities()) {
    act[a.id] = {{"prov:type", std::string("pt:") + activity_class_name(a.cls)},
                 {"pt:op_seq", a.op_seq},
                 {"pt:function", a.function},
                 {"pt:features", a.features}};
  }
  doc["entity"] = std::move(ent);
  doc["activity"] = std::move(act);
  for (auto k : kAllRelationKinds) doc[provjson::section(k)] = json::object();
  std::size_t n = 0;
  for (const auto& e : g.edges()) {
    auto [rs, rt] = provjson::roles(e.kind);
    doc[provjson::section(e.kind)]["_:r" + std::to_string(n++)] = {{rs, e.src}, {rt, e.tgt}, {"pt:provlets", e.provlets}};
  }
  json recs = json::array();
  for (const auto& [k, r] : g.records()) recs.push_back(logfmt::op_record_json(r));
  doc["pt:opRecords"] = std::move(recs);
  doc["pt:complete"] = g.complete();
  return doc;
}

inline std::string export_prov_json(const ProvGraph& g) { return to_prov_json(g).dump(1) + "\n"; }

inline ProvGraph from_prov_json(const nlohmann::json& doc) {
  ProvGraph g;
  try {
    for (const auto& [id, v] : doc.at("entity").items()) {
      g.add_entity(Entity{id, v.at("pt:op_seq").get<OpSeq>(), v.at("pt:row").get<RowId>(),
                          v.at("pt:feature").get<std::string>(), logfmt::json_value(v.at("pt:value"))});
    }
    for (const auto& [id, v] : doc.at("activity").items()) {
      std::string type = v.at("prov:type").get<std::string>();
      if (type.rfind("pt:", 0) != 0) throw IntegrityError("activity '" + id + "' has foreign type '" + type + "'");
      g.add_activity(Activity{id, v.at("pt:op_seq").get<OpSeq>(), parse_activity_class(type.substr(3)),
                              v.at("pt:function").get<std::string>(), v.at("pt:features").get<std::vector<FeatureName>>()});
    }
    // Relations are replayed in the order of their numeric ids.
    std::vector<std::tuple<std::size_t, Relation, std::vector<std::string>>> rels;
    for (auto k : kAllRelationKinds) {
      if (!doc.contains(provjson::section(k))) continue;
      auto [rs, rt] = provjson::roles(k);
      for (const auto& [rid, v] : doc.at(provjson::section(k)).items()) {
        if (rid.rfind("_:r", 0) != 0) throw IntegrityError("unexpected relation id '" + rid + "'");
        std::size_t n = logfmt::parse_u64(rid.substr(3), "relation id");
        std::vector<std::string> pl;
        if (v.contains("pt:provlets")) pl = v.at("pt:provlets").get<std::vector<std::string>>();
        rels.emplace_back(n, Relation{k, v.at(rs).get<std::string>(), v.at(rt).get<std::string>()}, std::move(pl));
      }
    }
    std::sort(rels.begin(), rels.end(), [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    for (const auto& [n, r, pl] : rels) {
      if (pl.empty()) g.add_relation(r, "");
      for (const auto& p : pl) g.add_relation(r, p);
    }
    if (doc.contains("pt:opRecords")) {
      for (const auto& r : doc.at("pt:opRecords")) g.add_record(logfmt::json_op_record(r));
    }
    g.set_complete(doc.value("pt:complete", true));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed PROV-JSON: ") + e.what());
  }
  g.check_references();
  g.finalize();
  return g;
}

inline ProvGraph import_prov_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed PROV-JSON: ") + e.what());
  }
  return from_prov_json(doc);
}

}  // namespace provtrack
