// Copyright 2026 The corrstruct Authors
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

#include "corrstruct/learning.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "corrstruct/error.hpp"
#include "corrstruct/parallel.hpp"

namespace corrstruct {

namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

double fraction_within(std::span<const std::size_t> ranks, int n) {
  if (ranks.empty()) return 0.0;
  const auto hits = std::count_if(ranks.begin(), ranks.end(),
                                  [n](std::size_t r) { return r <= static_cast<std::size_t>(n); });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

void check_same_layout(const CorrespondenceStructure& a, const CorrespondenceStructure& b) {
  if (!a.layout().same_geometry(b.layout())) {
    throw Error(ErrorCode::kShapeMismatch, "structures differ in grids or T_d");
  }
}

}  // namespace

MaskedStructure as_masked(const BinaryMappingStructure& m, LayoutPtr layout) {
  std::vector<std::vector<MaskedStructure::Entry>> rows(layout->n_rows());
  for (const Link& l : m.links) {
    if (l.probe >= rows.size()) throw Error(ErrorCode::kIndexOutOfRange, "link probe patch out of range");
    rows[l.probe].push_back({l.gallery, 0.0});
  }
  return MaskedStructure(std::move(layout), std::move(rows), m.source_probe);
}

void LearnConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidSpec, what); };
  if (!(epsilon > 0.0 && epsilon <= 1.0)) fail("epsilon must lie in (0, 1]");
  if (n_cmc < 1) fail("n_cmc must be >= 1");
  if (structures_per_iter < 2 || structures_per_iter % 2 != 0) {
    fail("structures_per_iter must be even and >= 2");
  }
  if (range_min < 1 || range_max < range_min) fail("candidate ranges must satisfy 1 <= min <= max");
  if (max_iters < 0) fail("max_iters must be >= 0");
  if (!(t_c >= 0.0 && t_c < 1.0)) fail("T_c must lie in [0, 1)");
  if (t_d < 1) fail("T_d must be >= 1");
  if (stall_iters < 1) fail("stall_iters must be >= 1");
  if (link_subsample < 1) fail("link_subsample must be >= 1");
}

TrainingSet::TrainingSet(const Matcher& matcher, std::span<const ImagePatches> probes,
                         std::span<const ImagePatches> galleries, LayoutPtr layout)
    : matcher_(&matcher), layout_(std::move(layout)) {
  if (probes.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "training set has no probes");
  std::vector<std::size_t> order;
  std::vector<char> used(galleries.size(), 0);
  for (const auto& p : probes) {
    const std::size_t b = correct_match_index(p.person_id, galleries);
    order.push_back(b);
    used[b] = 1;
  }
  for (std::size_t b = 0; b < galleries.size(); ++b) {
    if (!used[b]) order.push_back(b);
  }
  for (const auto& p : probes) {
    probes_.push_back(matcher.prepare(p));
    probe_feats_.push_back(p.feats);
    probe_ids_.push_back(p.image_id);
  }
  for (std::size_t b : order) {
    galleries_.push_back(matcher.prepare(galleries[b]));
    gallery_ids_.push_back(galleries[b].image_id);
  }
  for (std::size_t k = 0; k < probes.size(); ++k) gallery_feats_.push_back(galleries[order[k]].feats);
}

std::size_t TrainingSet::rank(std::size_t k, const MaskedStructure& s) const {
  std::vector<double> scores(galleries_.size());
  for (std::size_t b = 0; b < galleries_.size(); ++b) {
    scores[b] = matcher_->greedy_score(probes_[k], galleries_[b], s);
  }
  return rank_of(scores, gallery_ids_, k);
}

std::vector<std::size_t> TrainingSet::ranks(const MaskedStructure& s,
                                            std::span<const std::size_t> subset) const {
  const std::vector<std::size_t> all = subset.empty() ? all_indices(size()) : std::vector<std::size_t>();
  const std::span<const std::size_t> which = subset.empty() ? std::span<const std::size_t>(all) : subset;
  std::vector<std::size_t> out(which.size());
  parallel_for(which.size(), [&](std::size_t k) { out[k] = rank(which[k], s); });
  return out;
}

double mean_rank(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::kEmptyRanks, "no ranks to average");
  double sum = 0.0;
  for (std::size_t r : ranks) sum += static_cast<double>(r);
  return sum / static_cast<double>(ranks.size());
}

std::vector<BinaryMappingStructure> candidate_binary_structures(
    const Matcher& matcher, const PreparedImage& u, const PreparedImage& v_correct,
    const StructureLayout& layout, int range_min, int range_max, const std::string& source) {
  if (range_min < 1 || range_max < range_min) {
    throw Error(ErrorCode::kInvalidSpec, "candidate ranges must satisfy 1 <= min <= max");
  }
  const auto& engine = matcher.engine();
  const std::size_t n_ranges = static_cast<std::size_t>(range_max - range_min + 1);
  std::vector<BinaryMappingStructure> out(n_ranges);
  for (std::size_t r = 0; r < n_ranges; ++r) {
    out[r].source_probe = source;
    out[r].search_range = range_min + static_cast<int>(r);
  }
  const PatchGrid& gallery = layout.gallery();
  for (PatchIndex i = 0; i < layout.n_rows(); ++i) {
    const PatchIndex center = layout.colocated(i);
    const int reach = std::min(range_max, layout.t_d());
    const auto candidates = search_set(gallery, center, reach);
    std::vector<double> sim(candidates.size());
    std::vector<int> dist(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      sim[k] = engine.log_similarity(u, i, v_correct, candidates[k]);
      dist[k] = patch_distance(gallery, center, candidates[k]);
    }
    for (std::size_t r = 0; r < n_ranges; ++r) {
      const int limit = std::min(out[r].search_range, layout.t_d());
      std::ptrdiff_t best = -1;
      for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (dist[k] >= limit) continue;
        if (best < 0 || sim[k] > sim[static_cast<std::size_t>(best)]) best = static_cast<std::ptrdiff_t>(k);
      }
      if (best >= 0) out[r].links.push_back({i, candidates[static_cast<std::size_t>(best)]});
    }
  }
  return out;
}

BinaryMappingStructure optimal_binary_structure(
    const TrainingSet& train, std::size_t k, std::span<const BinaryMappingStructure> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidSpec, "no candidate structures");
  std::size_t best = 0;
  std::size_t best_rank = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const std::size_t r = train.rank(k, as_masked(candidates[c], train.layout()));
    const bool better = c == 0 || r < best_rank ||
                        (r == best_rank && candidates[c].search_range < candidates[best].search_range);
    if (better) {
      best = c;
      best_rank = r;
    }
  }
  return candidates[best];
}

double cmc_weight(const TrainingSet& train, const MaskedStructure& s, int n,
                  std::span<const std::size_t> probes) {
  const auto ranks = train.ranks(s, probes);
  return fraction_within(ranks, n);
}

double link_weight(const TrainingSet& train, const Link& link, int n,
                   std::span<const std::size_t> probes) {
  const std::vector<std::size_t> all = probes.empty() ? all_indices(train.size()) : std::vector<std::size_t>();
  const std::span<const std::size_t> which = probes.empty() ? std::span<const std::size_t>(all) : probes;
  const std::size_t n_rows = train.layout()->n_rows();
  const std::size_t n_gal = train.gallery_ids().size();
  const auto& engine = train.matcher().engine();
  std::vector<std::size_t> ranks(which.size());
  std::vector<double> scores(n_gal);
  for (std::size_t q = 0; q < which.size(); ++q) {
    const std::size_t k = which[q];
    for (std::size_t b = 0; b < n_gal; ++b) {
      const double value = std::max(
          engine.log_similarity(train.probe(k), link.probe, train.gallery(b), link.gallery),
          kUnmatchedPenalty);
      // Same accumulation order as Matcher::greedy_score on the one-link structure.
      double total = 0.0;
      for (std::size_t i = 0; i < n_rows; ++i) total += i == link.probe ? value : kUnmatchedPenalty;
      scores[b] = total;
    }
    ranks[q] = rank_of(scores, train.gallery_ids(), k);
  }
  return fraction_within(ranks, n);
}

Strata split_strata(std::span<const std::size_t> ranks) {
  std::vector<std::size_t> order = all_indices(ranks.size());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks[a] != ranks[b] ? ranks[a] < ranks[b] : a < b;
  });
  const std::size_t top = (order.size() + 1) / 2;
  Strata s;
  s.top.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top));
  s.bottom.assign(order.begin() + static_cast<std::ptrdiff_t>(top), order.end());
  return s;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const unsigned __int128 wide = static_cast<unsigned __int128>(rng()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

std::vector<std::size_t> select_binary_structures(std::span<const std::size_t> ranks, int count,
                                                  std::mt19937_64& rng) {
  if (count < 0 || ranks.size() < static_cast<std::size_t>(count)) {
    throw Error(ErrorCode::kPoolTooSmall, "pool of " + std::to_string(ranks.size()) +
                                              " structures is smaller than " +
                                              std::to_string(count));
  }
  const Strata strata = split_strata(ranks);
  const std::size_t half = static_cast<std::size_t>(count) / 2;
  std::vector<std::size_t> out;
  for (std::vector<std::size_t> stratum : {strata.top, strata.bottom}) {
    // Partial Fisher-Yates.
    for (std::size_t k = 0; k < half; ++k) {
      const std::size_t pick = k + uniform_index(rng, stratum.size() - k);
      std::swap(stratum[k], stratum[pick]);
      out.push_back(stratum[k]);
    }
  }
  return out;
}

EstimateResult estimate_update(std::span<const BinaryMappingStructure* const> gamma,
                               std::span<const double> structure_weights,
                               const std::map<Link, double>& link_weights,
                               const SimilarityTable& sim, const LayoutPtr& layout,
                               bool joint_normalization) {
  if (gamma.empty()) throw Error(ErrorCode::kInvalidSpec, "no binary structures selected");
  if (gamma.size() != structure_weights.size()) {
    throw Error(ErrorCode::kLengthMismatch, "one weight per selected structure is required");
  }
  const StructureLayout& L = *layout;
  const std::size_t n = L.n_rows();
  EstimateResult result{CorrespondenceStructure(layout), false};

  // Prior P(M_α).
  double weight_sum = 0.0;
  for (double w : structure_weights) weight_sum += w;
  std::vector<double> prior(gamma.size());
  if (weight_sum > 0.0) {
    for (std::size_t a = 0; a < gamma.size(); ++a) prior[a] = structure_weights[a] / weight_sum;
  } else {
    result.zero_weight_fallback = true;
    std::fill(prior.begin(), prior.end(), 1.0 / static_cast<double>(gamma.size()));
  }

  // impact[s][i] = P̂(x_i | link ending at x_s), normalized over i.
  std::vector<std::vector<double>> impact(n, std::vector<double>(n, 0.0));
  for (PatchIndex s = 0; s < n; ++s) {
    double total = 0.0;
    for (PatchIndex i = 0; i < n; ++i) {
      const int d = patch_distance(L.probe(), i, s);
      if (d < L.t_d()) {
        impact[s][i] = 1.0 / (d + 1.0);
        total += impact[s][i];
      }
    }
    for (double& v : impact[s]) v /= total;
  }

  std::vector<std::vector<double>> acc(n), plain(n);
  for (PatchIndex i = 0; i < n; ++i) {
    acc[i].assign(L.range(i).size(), 0.0);
    plain[i].assign(L.range(i).size(), 0.0);
  }

  std::vector<double> importance(n);
  std::vector<double> strength;
  for (std::size_t a = 0; a < gamma.size(); ++a) {
    const auto& links = gamma[a]->links;
    std::vector<std::ptrdiff_t> link_of(n, -1);
    for (const Link& l : links) {
      if (L.slot(l.probe, l.gallery) >= 0) link_of[l.probe] = static_cast<std::ptrdiff_t>(l.gallery);
    }

    // Link importances P̂(m_st | M_α).
    std::vector<double> lw(links.size());
    double lw_sum = 0.0;
    for (std::size_t k = 0; k < links.size(); ++k) {
      const auto it = link_weights.find(links[k]);
      if (it == link_weights.end()) {
        throw Error(ErrorCode::kInvalidSpec, "missing weight for link (" +
                                                 std::to_string(links[k].probe) + ", " +
                                                 std::to_string(links[k].gallery) + ")");
      }
      lw[k] = it->second;
      lw_sum += lw[k];
    }
    for (double& w : lw) w = lw_sum > 0.0 ? w / lw_sum : 1.0 / static_cast<double>(lw.size());

    // Patch importance P̂(x_i | M_α).
    std::fill(importance.begin(), importance.end(), 0.0);
    for (std::size_t k = 0; k < links.size(); ++k) {
      const auto& col = impact[links[k].probe];
      for (PatchIndex i = 0; i < n; ++i) importance[i] += lw[k] * col[i];
    }
    double imp_sum = 0.0;
    for (double v : importance) imp_sum += v;
    if (imp_sum > 0.0) {
      for (double& v : importance) v /= imp_sum;
    }

    // Correspondence strength P̂(y_j | x_i, M_α), normalized over the range.
    for (PatchIndex i = 0; i < n; ++i) {
      const auto& range = L.range(i);
      if (range.empty()) continue;
      strength.assign(range.size(), 0.0);
      const std::ptrdiff_t t = link_of[i];
      // Similarity relative to the whole candidate set, so a link stays the row maximum.
      double denom = 0.0;
      for (PatchIndex j : range) denom += sim.at(i, j);
      double total = 0.0;
      for (std::size_t k = 0; k < range.size(); ++k) {
        const bool linked = t >= 0 && range[k] == static_cast<PatchIndex>(t);
        strength[k] = linked ? 1.0 : (denom > 0.0 ? sim.at(i, range[k]) / denom : 1.0);
        total += strength[k];
      }
      for (std::size_t k = 0; k < range.size(); ++k) {
        const double v = strength[k] / total;
        acc[i][k] += prior[a] * importance[i] * v;
        plain[i][k] += prior[a] * v;
      }
    }
  }

  std::size_t nonempty = 0;
  double mass = 0.0;
  for (PatchIndex i = 0; i < n; ++i) {
    if (acc[i].empty()) continue;
    ++nonempty;
    double total = 0.0;
    for (double v : acc[i]) total += v;
    if (total <= 0.0) {
      // No link reaches this row: keep the strength term alone.
      acc[i] = plain[i];
      total = 0.0;
      for (double v : acc[i]) total += v;
    }
    if (!joint_normalization) {
      for (double& v : acc[i]) v /= total;
    }
    for (double v : acc[i]) mass += v;
  }
  const double scale =
      joint_normalization && mass > 0.0 ? static_cast<double>(nonempty) / mass : 1.0;
  for (PatchIndex i = 0; i < n; ++i) {
    auto row = result.p_hat.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = acc[i][k] * scale;
  }
  return result;
}

CorrespondenceStructure blend(const CorrespondenceStructure& prev,
                              const CorrespondenceStructure& p_hat, double epsilon) {
  check_same_layout(prev, p_hat);
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCode::kInvalidSpec, "epsilon must lie in [0, 1]");
  }
  if (epsilon == 0.0) return prev;
  CorrespondenceStructure out(prev.layout_ptr(), prev.tag());
  for (PatchIndex i = 0; i < prev.n_rows(); ++i) {
    const auto a = prev.row(i);
    const auto b = p_hat.row(i);
    auto o = out.row(i);
    for (std::size_t k = 0; k < o.size(); ++k) {
      o[k] = epsilon == 1.0 ? b[k] : a[k] + epsilon * (b[k] - a[k]);
    }
  }
  return out;
}

CorrespondenceStructure update_structure(const CorrespondenceStructure& prev,
                                         const CorrespondenceStructure& p_hat, double epsilon) {
  return normalize_rows(blend(prev, p_hat, epsilon)).structure;
}

CorrespondenceStructure simple_average_structure(std::span<const BinaryMappingStructure> pool,
                                                 const LayoutPtr& layout) {
  CorrespondenceStructure out(layout, "simple-average");
  if (pool.empty()) return out;
  const double w = 1.0 / static_cast<double>(pool.size());
  for (const auto& m : pool) {
    for (const Link& l : m.links) {
      const std::ptrdiff_t slot = layout->slot(l.probe, l.gallery);
      if (slot >= 0) out.row(l.probe)[static_cast<std::size_t>(slot)] += w;
    }
  }
  return out;
}

LearnResult learn(const TrainingSet& train, const LearnConfig& cfg, std::uint64_t seed,
                  const IterationObserver& observer) {
  cfg.validate();
  const LayoutPtr& layout = train.layout();
  if (layout->t_d() != cfg.t_d) {
    throw Error(ErrorCode::kInvalidSpec, "training layout T_d differs from the learn config");
  }
  const std::size_t n_train = train.size();
  if (n_train < static_cast<std::size_t>(cfg.structures_per_iter)) {
    throw Error(ErrorCode::kPoolTooSmall, "training set has " + std::to_string(n_train) +
                                              " identities; " +
                                              std::to_string(cfg.structures_per_iter) +
                                              " structures per iteration requested");
  }

  LearnResult result;
  CorrespondenceStructure current = init_structure(layout);
  if (observer) observer(0, current);
  auto current_ranks = train.ranks(MaskedStructure(current, cfg.t_c));
  double objective = mean_rank(current_ranks);
  result.trace.entries.push_back({0, objective, true, current.checksum()});

  if (cfg.max_iters > 0) {
    // Step 1: optimal binary mapping structure per training probe.
    result.pool.resize(n_train);
    parallel_for(n_train, [&](std::size_t k) {
      const auto candidates =
          candidate_binary_structures(train.matcher(), train.probe(k), train.gallery(k), *layout,
                                      cfg.range_min, cfg.range_max, train.probe_id(k));
      result.pool[k] = optimal_binary_structure(train, k, candidates);
    });

    std::vector<double> structure_weight(n_train);
    for (std::size_t k = 0; k < n_train; ++k) {
      structure_weight[k] = cmc_weight(train, as_masked(result.pool[k], layout), cfg.n_cmc);
    }

    std::vector<std::size_t> link_probes;
    if (n_train > static_cast<std::size_t>(cfg.link_subsample)) {
      std::mt19937_64 sub_rng(mix_seed(seed, 2));
      std::vector<std::size_t> order = all_indices(n_train);
      for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.link_subsample); ++k) {
        std::swap(order[k], order[k + uniform_index(sub_rng, n_train - k)]);
      }
      link_probes.assign(order.begin(), order.begin() + cfg.link_subsample);
      std::sort(link_probes.begin(), link_probes.end());
    }
    std::set<Link> unique_links;
    for (const auto& m : result.pool) unique_links.insert(m.links.begin(), m.links.end());
    const std::vector<Link> links(unique_links.begin(), unique_links.end());
    std::vector<double> lw(links.size());
    parallel_for(links.size(), [&](std::size_t k) {
      lw[k] = link_weight(train, links[k], cfg.n_cmc, link_probes);
    });
    std::map<Link, double> link_weights;
    for (std::size_t k = 0; k < links.size(); ++k) link_weights.emplace(links[k], lw[k]);

    const SimilarityTable sim =
        build_similarity_table(train.features(), train.matcher().engine().bank(),
                               layout->probe(), layout->gallery(), layout->t_d());

    std::mt19937_64 rng(mix_seed(seed, 1));
    int stall = 0;
    bool moved = false;  // the stall count starts once the objective leaves its initial value
    for (int it = 1; it <= cfg.max_iters; ++it) {
      const auto picked = select_binary_structures(current_ranks, cfg.structures_per_iter, rng);
      std::vector<const BinaryMappingStructure*> gamma;
      std::vector<double> weights;
      for (std::size_t k : picked) {
        gamma.push_back(&result.pool[k]);
        weights.push_back(structure_weight[k]);
      }
      const EstimateResult est =
          estimate_update(gamma, weights, link_weights, sim, layout, cfg.joint_normalization);
      CorrespondenceStructure candidate = update_structure(current, est.p_hat, cfg.epsilon);
      auto candidate_ranks = train.ranks(MaskedStructure(candidate, cfg.t_c));
      const double candidate_objective = mean_rank(candidate_ranks);

      const bool accepted = !cfg.use_eval_module || candidate_objective <= objective;
      const bool changed = accepted && candidate_objective != objective;
      if (accepted) {
        current = std::move(candidate);
        current_ranks = std::move(candidate_ranks);
        objective = candidate_objective;
      }
      result.trace.entries.push_back({it, objective, accepted, current.checksum()});
      if (observer) observer(it, current);
      moved = moved || changed;
      stall = changed || !moved ? 0 : stall + 1;
      if (stall >= cfg.stall_iters) break;
    }
  }
  result.structure = std::move(current);
  return result;
}

}  // namespace corrstruct
