#pragma once

// A problem instance on disk: graph.txt (edge list) plus one dataset file per
// node. Generation is a pure function of the seed.

#include <cstdint>
#include <algorithm>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "kwsa/graph.hpp"
#include "kwsa/manifest.hpp"
#include "kwsa/objective.hpp"
#include "kwsa/random.hpp"
#include "kwsa/text.hpp"

namespace kwsa {

struct ProblemInstance {
  Graph graph;
  std::vector<LocalObjective> objectives;
  /// Exact file contents, in file-name order; hashes are taken over these.
  std::string graph_text;
  std::vector<std::pair<std::string, std::string>> dataset_files;

  std::string graph_hash() const { return git_blob_hash(graph_text); }
  std::string dataset_hash() const { return file_set_hash(dataset_files); }
};

inline constexpr const char* kGraphFile = "graph.txt";

inline std::string node_file_name(std::size_t i, std::size_t num_nodes) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(num_nodes - 1).size());
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "node_" + digits + ".txt";
}

/// Graph from stream (seed, 0, 0, graph), data from (seed, 0, 0, dataset).
inline ProblemInstance generate_instance(const GeometricGraphSpec& graph_spec, const DatasetSpec& data_spec,
                                         std::uint64_t seed) {
  if (graph_spec.num_nodes != data_spec.num_nodes)
    throw InvariantViolation("instance: graph and dataset node counts differ");
  RandomStream graph_rng = RandomStream::derive(seed, 0, 0, StreamPurpose::graph);
  RandomStream data_rng = RandomStream::derive(seed, 0, 0, StreamPurpose::dataset);
  ProblemInstance inst{generate_geometric_graph(graph_spec, graph_rng), generate_dataset(data_spec, data_rng), {}, {}};
  inst.graph_text = to_edge_list(inst.graph);
  for (std::size_t i = 0; i < inst.objectives.size(); ++i)
    inst.dataset_files.emplace_back(node_file_name(i, inst.objectives.size()),
                                    to_dataset_text(*inst.objectives[i].as_logistic()));
  return inst;
}

inline void write_instance(const ProblemInstance& inst, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  write_file((dir / kGraphFile).string(), inst.graph_text);
  for (const auto& [name, content] : inst.dataset_files) write_file((dir / name).string(), content);
}

inline ProblemInstance load_instance(const std::filesystem::path& dir) {
  std::string graph_text = read_file((dir / kGraphFile).string());
  Graph graph = parse_edge_list(graph_text);
  ProblemInstance inst{std::move(graph), {}, std::move(graph_text), {}};
  const std::size_t n = inst.graph.num_nodes();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = node_file_name(i, n);
    std::string content = read_file((dir / name).string());
    try {
      inst.objectives.emplace_back(parse_dataset_text(content));
    } catch (const ParseError& e) {
      throw ParseError(name + ": " + e.what());
    }
    inst.dataset_files.emplace_back(name, std::move(content));
  }
  for (const auto& f : inst.objectives)
    if (f.dimension() != inst.objectives.front().dimension())
      throw ParseError("dataset files disagree on the dimension");
  return inst;
}

}  // namespace kwsa
