#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dexgrasp/evaluator.hpp"
#include "dexgrasp/metrics.hpp"
#include "dexgrasp/pointcloud.hpp"

namespace dexgrasp {

struct AffordanceRequest {
  std::string affordance;  // e.g. "use", "grab", "hand over"
  std::string image_ref;   // scene/image identifier consumed by the oracle
  PointCloud cloud;        // scene cloud, same frame the bps was built from
};

/// The pluggable stand-in for the MLLM/LLM/VLM trio: object naming,
/// affordance-to-part reasoning, and part segmentation over the cloud.
class AffordanceOracle {
 public:
  virtual ~AffordanceOracle() = default;
  virtual std::string object_name(const std::string& image_ref) = 0;
  virtual std::string part_name(const std::string& affordance,
                                const std::string& object) = 0;
  virtual std::vector<std::uint8_t> part_mask(const std::string& part,
                                              const PointCloud& cloud) = 0;
};

/// Deterministic offline oracle backed by a JSON knowledge base:
///   {"objects": {"hammer": {
///       "affordances": {"use": "handle", ...},
///       "parts": {"handle": {"axis": "z", "side": "below", "quantile": 0.5},
///                 ...}}}}
/// Part rules segment the cloud by an axis quantile.
class MockAffordanceOracle : public AffordanceOracle {
 public:
  explicit MockAffordanceOracle(nlohmann::json kb);
  static MockAffordanceOracle with_default_kb();
  static const char* default_kb_text();

  std::string object_name(const std::string& image_ref) override;
  std::string part_name(const std::string& affordance,
                        const std::string& object) override;
  std::vector<std::uint8_t> part_mask(const std::string& part,
                                      const PointCloud& cloud) override;

 private:
  nlohmann::json kb_;
};

/// HTTP client oracle: three POST endpoints with JSON bodies
/// (/object_name, /part_name, /part_mask), a hard deadline, no retries.
class HttpAffordanceOracle : public AffordanceOracle {
 public:
  HttpAffordanceOracle(std::string host, int port,
                       double timeout_seconds = 10.0);

  std::string object_name(const std::string& image_ref) override;
  std::string part_name(const std::string& affordance,
                        const std::string& object) override;
  std::vector<std::uint8_t> part_mask(const std::string& part,
                                      const PointCloud& cloud) override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  std::string host_;
  int port_;
  double timeout_seconds_;
};

struct RankedGrasp {
  Grasp grasp;
  double score = 0.0;
  std::optional<double> filter_cost;
};

/// cost(g) = mean distance from the palm to the m nearest part points plus
/// lambda times the angle between the approach axis and the palm-to-part
/// direction. Returns the min(k, n) lowest-cost grasps, cost ascending.
std::vector<std::pair<Grasp, double>> knn_part_filter(
    const std::vector<Grasp>& grasps, const PointCloud& part, int k,
    double lambda = 0.05, int m_neighbors = 16);

/// Stable sort by score descending; index 0 is the selected grasp. When
/// costs are given they ride along (and break ties via the stable order of
/// the cost-ascending input).
std::vector<RankedGrasp> rank_and_select(const std::vector<Grasp>& grasps,
                                         const std::vector<double>& scores,
                                         const std::vector<double>* costs = nullptr);

struct TraceRecord {
  std::string stage;
  nlohmann::json detail;
};

struct PipelineConfig {
  int n_samples = 100;
  int knn_k = 30;
  double knn_lambda = 0.05;
  int knn_m = 16;
  std::uint64_t seed = 0;
  double workspace_radius = 1.0;
  std::filesystem::path trace_path;  // empty: no trace file
};

struct PipelineResult {
  std::string object_name;
  std::string part_name;
  std::vector<RankedGrasp> ranked;  // filtered grasps, best score first
  RankedGrasp top;
  std::vector<TraceRecord> trace;   // one record per pipeline stage (7)
};

/// Task-oriented grasping: affordance prompting, part cropping, grasp
/// synthesis, KNN filtering, evaluator scoring, best-grasp selection.
/// Grasps are produced and returned in the object-centroid frame defined by
/// `cloud_centroid`.
PipelineResult run_afford_pipeline(const AffordanceRequest& req,
                                   AffordanceOracle& oracle,
                                   const Network& generator,
                                   const Network& evaluator,
                                   const std::vector<double>& scene_bps,
                                   const Vec3& cloud_centroid,
                                   const PipelineConfig& cfg);

void write_trace_jsonl(const std::filesystem::path& path,
                       const std::vector<TraceRecord>& trace);

}  // namespace dexgrasp
