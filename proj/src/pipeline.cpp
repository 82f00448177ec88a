#include "dexgrasp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <httplib.h>

namespace dexgrasp {

namespace {

const char* kDefaultKb = R"kb({
  "objects": {
    "hammer": {
      "affordances": {"use": "handle", "hand over": "head", "grab": "handle"},
      "parts": {
        "handle": {"axis": "z", "side": "below", "quantile": 0.5},
        "head": {"axis": "z", "side": "above", "quantile": 0.6}
      }
    },
    "pan": {
      "affordances": {"grab": "handle", "use": "handle", "hand over": "body"},
      "parts": {
        "handle": {"axis": "x", "side": "above", "quantile": 0.6},
        "body": {"axis": "x", "side": "below", "quantile": 0.6}
      }
    }
  }
})kb";

}  // namespace

const char* MockAffordanceOracle::default_kb_text() { return kDefaultKb; }

MockAffordanceOracle::MockAffordanceOracle(nlohmann::json kb)
    : kb_(std::move(kb)) {
  require(kb_.contains("objects"), Errc::config,
          "oracle knowledge base lacks 'objects'");
}

MockAffordanceOracle MockAffordanceOracle::with_default_kb() {
  return MockAffordanceOracle(nlohmann::json::parse(kDefaultKb));
}

std::string MockAffordanceOracle::object_name(const std::string& image_ref) {
  if (kb_.at("objects").contains(image_ref)) return image_ref;
  fail(Errc::oracle, "mock oracle does not recognize image '" + image_ref + "'");
}

std::string MockAffordanceOracle::part_name(const std::string& affordance,
                                            const std::string& object) {
  require(kb_.at("objects").contains(object), Errc::oracle,
          "unknown object '" + object + "'");
  const auto& aff = kb_.at("objects").at(object).at("affordances");
  require(aff.contains(affordance), Errc::oracle,
          "object '" + object + "' has no part for affordance '" + affordance +
              "'");
  return aff.at(affordance).get<std::string>();
}

std::vector<std::uint8_t> MockAffordanceOracle::part_mask(
    const std::string& part, const PointCloud& cloud) {
  require(!cloud.empty(), Errc::insufficient_points, "mask over empty cloud");
  const nlohmann::json* rule = nullptr;
  for (const auto& [name, obj] : kb_.at("objects").items()) {
    (void)name;
    if (obj.at("parts").contains(part)) {
      rule = &obj.at("parts").at(part);
      break;
    }
  }
  require(rule != nullptr, Errc::part_not_found,
          "no segmentation rule for part '" + part + "'");
  const std::string axis = rule->at("axis").get<std::string>();
  const std::string side = rule->at("side").get<std::string>();
  const double quantile = rule->at("quantile").get<double>();
  const int ax = axis == "x" ? 0 : axis == "y" ? 1 : 2;

  std::vector<double> values(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) values[i] = cloud.points[i][ax];
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const auto qi = static_cast<std::size_t>(std::min<double>(
      static_cast<double>(sorted.size() - 1),
      std::max(0.0, std::round(quantile * static_cast<double>(sorted.size() - 1)))));
  const double threshold = sorted[qi];

  std::vector<std::uint8_t> mask(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const bool below = values[i] <= threshold;
    mask[i] = (side == "below") == below ? 1 : 0;
  }
  return mask;
}

HttpAffordanceOracle::HttpAffordanceOracle(std::string host, int port,
                                           double timeout_seconds)
    : host_(std::move(host)), port_(port), timeout_seconds_(timeout_seconds) {}

nlohmann::json HttpAffordanceOracle::post(const std::string& path,
                                          const nlohmann::json& body) {
  httplib::Client client(host_, port_);
  const auto sec = static_cast<time_t>(timeout_seconds_);
  const auto usec = static_cast<time_t>(
      (timeout_seconds_ - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  const auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    fail(Errc::oracle, "oracle request " + path + " failed: " +
                           httplib::to_string(res.error()));
  }
  require(res->status == 200, Errc::oracle,
          "oracle request " + path + " returned status " +
              std::to_string(res->status));
  return nlohmann::json::parse(res->body);
}

std::string HttpAffordanceOracle::object_name(const std::string& image_ref) {
  return post("/object_name", {{"image_b64", image_ref}})
      .at("object_name")
      .get<std::string>();
}

std::string HttpAffordanceOracle::part_name(const std::string& affordance,
                                            const std::string& object) {
  return post("/part_name", {{"affordance", affordance}, {"object_name", object}})
      .at("part_name")
      .get<std::string>();
}

std::vector<std::uint8_t> HttpAffordanceOracle::part_mask(
    const std::string& part, const PointCloud& cloud) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : cloud.points) pts.push_back({p.x(), p.y(), p.z()});
  const auto reply =
      post("/part_mask", {{"part_name", part}, {"cloud", pts}});
  const auto& m = reply.at("mask");
  std::vector<std::uint8_t> mask;
  mask.reserve(m.size());
  for (const auto& v : m) mask.push_back(v.get<bool>() ? 1 : 0);
  return mask;
}

std::vector<std::pair<Grasp, double>> knn_part_filter(
    const std::vector<Grasp>& grasps, const PointCloud& part, int k,
    double lambda, int m_neighbors) {
  require(!grasps.empty(), Errc::empty_batch, "knn filter over no grasps");
  require(!part.empty(), Errc::empty_part, "knn filter needs a part cloud");
  require(k >= 1, Errc::config, "k must be >= 1");
  const int m = std::min<int>(m_neighbors, static_cast<int>(part.size()));
  const Vec3 part_centroid = part.centroid();

  std::vector<std::pair<Grasp, double>> costed;
  costed.reserve(grasps.size());
  std::vector<double> dists(part.size());
  for (const auto& g : grasps) {
    for (std::size_t i = 0; i < part.size(); ++i)
      dists[i] = (part.points[i] - g.translation).norm();
    std::nth_element(dists.begin(), dists.begin() + (m - 1), dists.end());
    double mean_dist = 0.0;
    for (int i = 0; i < m; ++i) mean_dist += dists[static_cast<std::size_t>(i)];
    mean_dist /= m;

    double angle = 0.0;
    const Vec3 to_part = part_centroid - g.translation;
    if (to_part.norm() > 1e-12) {
      const double c = std::clamp(
          g.approach_axis().dot(to_part.normalized()), -1.0, 1.0);
      angle = std::acos(c);
    }
    costed.emplace_back(g, mean_dist + lambda * angle);
  }
  std::stable_sort(costed.begin(), costed.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), costed.size());
  costed.resize(keep);
  return costed;
}

std::vector<RankedGrasp> rank_and_select(const std::vector<Grasp>& grasps,
                                         const std::vector<double>& scores,
                                         const std::vector<double>* costs) {
  require(grasps.size() == scores.size(), Errc::shape_mismatch,
          "rank_and_select inputs are not aligned");
  require(!grasps.empty(), Errc::empty_batch, "nothing to rank");
  if (costs != nullptr) {
    require(costs->size() == grasps.size(), Errc::shape_mismatch,
            "filter costs are not aligned");
  }
  std::vector<std::size_t> order(grasps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<RankedGrasp> out;
  out.reserve(order.size());
  for (std::size_t i : order) {
    RankedGrasp r;
    r.grasp = grasps[i];
    r.score = scores[i];
    if (costs != nullptr) r.filter_cost = (*costs)[i];
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

/// nth_element above reorders `dists`; keep a dedicated copy per grasp.
[[maybe_unused]] constexpr int kTraceStages = 7;

}  // namespace

PipelineResult run_afford_pipeline(const AffordanceRequest& req,
                                   AffordanceOracle& oracle,
                                   const Network& generator,
                                   const Network& evaluator,
                                   const std::vector<double>& scene_bps,
                                   const Vec3& cloud_centroid,
                                   const PipelineConfig& cfg) {
  require(!req.affordance.empty(), Errc::config, "affordance must be non-empty");
  require(!req.cloud.empty(), Errc::insufficient_points,
          "pipeline needs a scene cloud");

  PipelineResult result;
  auto trace = [&result](const std::string& stage, nlohmann::json detail) {
    result.trace.push_back({stage, std::move(detail)});
  };
  auto stage_guard = [](const std::string& stage, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      if (e.code() == Errc::oracle) {
        fail(Errc::oracle, "stage " + stage + ": " + e.what());
      }
      throw;
    }
  };

  // Affordance prompting.
  result.object_name = stage_guard("object_name", [&] {
    return oracle.object_name(req.image_ref);
  });
  trace("object_name", {{"object_name", result.object_name}});

  result.part_name = stage_guard("part_name", [&] {
    return oracle.part_name(req.affordance, result.object_name);
  });
  trace("part_name",
        {{"affordance", req.affordance}, {"part_name", result.part_name}});

  const auto mask = stage_guard("part_mask", [&] {
    return oracle.part_mask(result.part_name, req.cloud);
  });
  require(mask.size() == req.cloud.size(), Errc::shape_mismatch,
          "oracle mask length does not match the cloud");
  const auto selected =
      std::count_if(mask.begin(), mask.end(), [](std::uint8_t b) { return b != 0; });
  trace("part_mask", {{"points", mask.size()}, {"selected", selected}});

  // Crop in the object-centroid frame the grasps live in.
  PointCloud centered;
  centered.points.reserve(req.cloud.size());
  for (const auto& p : req.cloud.points) centered.points.push_back(p - cloud_centroid);
  const PointCloud part = crop_by_mask(centered, mask);
  trace("crop", {{"part_points", part.size()}});

  // Grasp synthesis and ranking.
  const auto grasps = sample_grasps(generator, scene_bps, cfg.n_samples,
                                    cfg.seed, cfg.workspace_radius);
  trace("sample_grasps", {{"n", grasps.size()}});

  const auto filtered =
      knn_part_filter(grasps, part, cfg.knn_k, cfg.knn_lambda, cfg.knn_m);
  trace("knn_filter",
        {{"kept", filtered.size()},
         {"cost_min", filtered.front().second},
         {"cost_max", filtered.back().second}});

  std::vector<Grasp> kept;
  std::vector<double> costs;
  kept.reserve(filtered.size());
  for (const auto& [g, c] : filtered) {
    kept.push_back(g);
    costs.push_back(c);
  }
  const auto scores = score_grasps(evaluator, scene_bps, kept);
  result.ranked = rank_and_select(kept, scores, &costs);
  result.top = result.ranked.front();
  trace("rank", {{"kept", result.ranked.size()},
                 {"top_score", result.top.score},
                 {"top_cost", result.top.filter_cost.value_or(0.0)}});

  if (!cfg.trace_path.empty()) write_trace_jsonl(cfg.trace_path, result.trace);
  return result;
}

void write_trace_jsonl(const std::filesystem::path& path,
                       const std::vector<TraceRecord>& trace) {
  std::ofstream os(path, std::ios::trunc);
  require(os.good(), Errc::io, "cannot open '" + path.string() + "'");
  for (const auto& rec : trace) {
    nlohmann::json j;
    j["stage"] = rec.stage;
    j["detail"] = rec.detail;
    os << j.dump() << "\n";
  }
  require(os.good(), Errc::io, "trace write failed");
}

}  // namespace dexgrasp
