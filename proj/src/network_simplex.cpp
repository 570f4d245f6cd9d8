#include "wqlab/detail/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace wqlab::detail {

namespace {

constexpr signed char kStateTree = 0;
constexpr signed char kStateLower = 1;
constexpr signed char kDirUp = 1;
constexpr signed char kDirDown = -1;
constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();

// Potentials are refreshed from the tree this often to bound drift.
constexpr std::int64_t kRefreshInterval = 200000;

}  // namespace

TransportSimplex::TransportSimplex(const std::vector<std::int64_t>& supply, const std::vector<std::int64_t>& demand,
                                   double cost_bound)
    : n_(static_cast<int>(supply.size())), m_(static_cast<int>(demand.size())) {
  if (std::accumulate(supply.begin(), supply.end(), std::int64_t{0}) !=
      std::accumulate(demand.begin(), demand.end(), std::int64_t{0})) {
    throw std::invalid_argument("TransportSimplex: unbalanced supplies");
  }
  node_num_ = n_ + m_;
  root_ = node_num_;
  const auto nodes = static_cast<std::size_t>(node_num_ + 1);
  pi_.assign(nodes, 0.0);
  parent_.assign(nodes, -1);
  pred_.assign(nodes, -1);
  thread_.assign(nodes, 0);
  rev_thread_.assign(nodes, 0);
  succ_num_.assign(nodes, 0);
  last_succ_.assign(nodes, 0);
  pred_dir_.assign(nodes, kDirUp);

  // Any artificial cost above the largest real cost drives all flow onto real
  // arcs once every source-target pair has been priced: a unit routed through
  // the root can always be rerouted along a direct arc.
  const double scale = cost_bound > 0.0 ? cost_bound : 1.0;
  const double art_cost = 2.0 * scale;
  tolerance_ = 1e-11 * scale;

  const auto art = static_cast<std::size_t>(node_num_);
  source_.resize(art);
  target_.resize(art);
  cost_.resize(art);
  flow_.resize(art);
  state_.assign(art, kStateTree);

  parent_[root_] = -1;
  pred_[root_] = -1;
  thread_[root_] = 0;
  rev_thread_[0] = root_;
  succ_num_[root_] = node_num_ + 1;
  last_succ_[root_] = root_ - 1;
  pi_[root_] = 0.0;

  for (int u = 0; u < node_num_; ++u) {
    const auto su = static_cast<std::size_t>(u);
    const int e = u;
    const std::int64_t node_supply = u < n_ ? supply[su] : -demand[su - static_cast<std::size_t>(n_)];
    parent_[su] = root_;
    pred_[su] = e;
    thread_[su] = u + 1;
    rev_thread_[su + 1] = u;
    succ_num_[su] = 1;
    last_succ_[su] = u;
    if (node_supply >= 0) {
      pred_dir_[su] = kDirUp;
      pi_[su] = 0.0;
      source_[su] = u;
      target_[su] = root_;
      flow_[su] = node_supply;
      cost_[su] = 0.0;
    } else {
      pred_dir_[su] = kDirDown;
      pi_[su] = art_cost;
      source_[su] = root_;
      target_[su] = u;
      flow_[su] = -node_supply;
      cost_[su] = art_cost;
    }
  }
  first_real_ = node_num_;
  next_arc_ = static_cast<std::size_t>(first_real_);
}

void TransportSimplex::reserve_arcs(std::size_t count) {
  const std::size_t total = static_cast<std::size_t>(first_real_) + count;
  source_.reserve(total);
  target_.reserve(total);
  cost_.reserve(total);
  flow_.reserve(total);
  state_.reserve(total);
}

void TransportSimplex::add_arc(int source, int target, double cost) {
  source_.push_back(source);
  target_.push_back(n_ + target);
  cost_.push_back(cost);
  flow_.push_back(0);
  state_.push_back(kStateLower);
}

bool TransportSimplex::artificial_flow() const {
  for (int e = 0; e < first_real_; ++e) {
    if (flow_[static_cast<std::size_t>(e)] != 0) return true;
  }
  return false;
}

void TransportSimplex::solve() {
  const std::size_t real = arc_count();
  if (real == 0) return;
  block_size_ = std::max(10, static_cast<int>(std::sqrt(static_cast<double>(real))));
  if (next_arc_ < static_cast<std::size_t>(first_real_) || next_arc_ >= source_.size()) {
    next_arc_ = static_cast<std::size_t>(first_real_);
  }
  std::int64_t since_refresh = 0;
  while (find_entering_arc()) {
    find_join_node();
    find_leaving_arc();
    change_flow();
    update_tree_structure();
    update_potential();
    ++pivots_;
    if (++since_refresh == kRefreshInterval) {
      refresh_potentials();
      since_refresh = 0;
    }
  }
}

void TransportSimplex::refresh_potentials() {
  pi_[static_cast<std::size_t>(root_)] = 0.0;
  for (int u = thread_[static_cast<std::size_t>(root_)]; u != root_; u = thread_[static_cast<std::size_t>(u)]) {
    const auto su = static_cast<std::size_t>(u);
    const auto e = static_cast<std::size_t>(pred_[su]);
    pi_[su] = pi_[static_cast<std::size_t>(parent_[su])] - pred_dir_[su] * cost_[e];
  }
}

bool TransportSimplex::find_entering_arc() {
  double min = -tolerance_;
  int cnt = block_size_;
  const std::size_t end = source_.size();
  const std::size_t begin = static_cast<std::size_t>(first_real_);
  std::size_t e;
  for (e = next_arc_; e != end; ++e) {
    const double c = state_[e] * (cost_[e] + pi_[static_cast<std::size_t>(source_[e])] -
                                  pi_[static_cast<std::size_t>(target_[e])]);
    if (c < min) {
      min = c;
      in_arc_ = static_cast<int>(e);
    }
    if (--cnt == 0) {
      if (min < -tolerance_) goto search_end;
      cnt = block_size_;
    }
  }
  for (e = begin; e != next_arc_; ++e) {
    const double c = state_[e] * (cost_[e] + pi_[static_cast<std::size_t>(source_[e])] -
                                  pi_[static_cast<std::size_t>(target_[e])]);
    if (c < min) {
      min = c;
      in_arc_ = static_cast<int>(e);
    }
    if (--cnt == 0) {
      if (min < -tolerance_) goto search_end;
      cnt = block_size_;
    }
  }
  if (min >= -tolerance_) return false;

search_end:
  next_arc_ = e == end ? begin : e;
  return true;
}

void TransportSimplex::find_join_node() {
  int u = source_[static_cast<std::size_t>(in_arc_)];
  int v = target_[static_cast<std::size_t>(in_arc_)];
  while (u != v) {
    if (succ_num_[static_cast<std::size_t>(u)] < succ_num_[static_cast<std::size_t>(v)]) {
      u = parent_[static_cast<std::size_t>(u)];
    } else {
      v = parent_[static_cast<std::size_t>(v)];
    }
  }
  join_ = u;
}

void TransportSimplex::find_leaving_arc() {
  // Entering arcs are always at their lower bound, so flow runs source -> target.
  const int first = source_[static_cast<std::size_t>(in_arc_)];
  const int second = target_[static_cast<std::size_t>(in_arc_)];
  delta_ = kInf;
  int result = 0;
  for (int u = first; u != join_; u = parent_[static_cast<std::size_t>(u)]) {
    const auto su = static_cast<std::size_t>(u);
    const std::int64_t d = pred_dir_[su] == kDirUp ? flow_[static_cast<std::size_t>(pred_[su])] : kInf;
    if (d < delta_) {
      delta_ = d;
      u_out_ = u;
      result = 1;
    }
  }
  for (int u = second; u != join_; u = parent_[static_cast<std::size_t>(u)]) {
    const auto su = static_cast<std::size_t>(u);
    const std::int64_t d = pred_dir_[su] == kDirDown ? flow_[static_cast<std::size_t>(pred_[su])] : kInf;
    if (d <= delta_) {
      delta_ = d;
      u_out_ = u;
      result = 2;
    }
  }
  if (result == 0 || delta_ == kInf) {
    throw std::logic_error("TransportSimplex: unbounded cycle in an uncapacitated transportation problem");
  }
  if (result == 1) {
    u_in_ = first;
    v_in_ = second;
  } else {
    u_in_ = second;
    v_in_ = first;
  }
}

void TransportSimplex::change_flow() {
  const auto in = static_cast<std::size_t>(in_arc_);
  if (delta_ > 0) {
    flow_[in] += delta_;
    for (int u = source_[in]; u != join_; u = parent_[static_cast<std::size_t>(u)]) {
      const auto su = static_cast<std::size_t>(u);
      flow_[static_cast<std::size_t>(pred_[su])] -= pred_dir_[su] * delta_;
    }
    for (int u = target_[in]; u != join_; u = parent_[static_cast<std::size_t>(u)]) {
      const auto su = static_cast<std::size_t>(u);
      flow_[static_cast<std::size_t>(pred_[su])] += pred_dir_[su] * delta_;
    }
  }
  state_[in] = kStateTree;
  state_[static_cast<std::size_t>(pred_[static_cast<std::size_t>(u_out_)])] = kStateLower;
}

void TransportSimplex::update_tree_structure() {
  auto& parent = parent_;
  auto& pred = pred_;
  auto& thread = thread_;
  auto& rev_thread = rev_thread_;
  auto& succ_num = succ_num_;
  auto& last_succ = last_succ_;
  auto& pred_dir = pred_dir_;
  auto at = [](int i) { return static_cast<std::size_t>(i); };

  const int old_rev_thread = rev_thread[at(u_out_)];
  const int old_succ_num = succ_num[at(u_out_)];
  const int old_last_succ = last_succ[at(u_out_)];
  v_out_ = parent[at(u_out_)];

  if (u_in_ == u_out_) {
    parent[at(u_in_)] = v_in_;
    pred[at(u_in_)] = in_arc_;
    pred_dir[at(u_in_)] = u_in_ == source_[at(in_arc_)] ? kDirUp : kDirDown;

    if (thread[at(v_in_)] != u_out_) {
      int after = thread[at(old_last_succ)];
      thread[at(old_rev_thread)] = after;
      rev_thread[at(after)] = old_rev_thread;
      after = thread[at(v_in_)];
      thread[at(v_in_)] = u_out_;
      rev_thread[at(u_out_)] = v_in_;
      thread[at(old_last_succ)] = after;
      rev_thread[at(after)] = old_last_succ;
    }
  } else {
    // When old_rev_thread == v_in, join and v_out coincide.
    const int thread_continue = old_rev_thread == v_in_ ? thread[at(old_last_succ)] : thread[at(v_in_)];

    // Re-hang the stem nodes between u_in and u_out.
    int stem = u_in_;
    int par_stem = v_in_;
    int next_stem;
    int last = last_succ[at(u_in_)];
    int before;
    int after = thread[at(last)];
    thread[at(v_in_)] = u_in_;
    dirty_revs_.clear();
    dirty_revs_.push_back(v_in_);
    while (stem != u_out_) {
      next_stem = parent[at(stem)];
      thread[at(last)] = next_stem;
      dirty_revs_.push_back(last);

      before = rev_thread[at(stem)];
      thread[at(before)] = after;
      rev_thread[at(after)] = before;

      parent[at(stem)] = par_stem;
      par_stem = stem;
      stem = next_stem;

      last = last_succ[at(stem)] == last_succ[at(par_stem)] ? rev_thread[at(par_stem)] : last_succ[at(stem)];
      after = thread[at(last)];
    }
    parent[at(u_out_)] = par_stem;
    thread[at(last)] = thread_continue;
    rev_thread[at(thread_continue)] = last;
    last_succ[at(u_out_)] = last;

    if (old_rev_thread != v_in_) {
      thread[at(old_rev_thread)] = after;
      rev_thread[at(after)] = old_rev_thread;
    }

    for (int u : dirty_revs_) rev_thread[at(thread[at(u)])] = u;

    int tmp_sc = 0;
    const int tmp_ls = last_succ[at(u_out_)];
    for (int u = u_out_, p = parent[at(u)]; u != u_in_; u = p, p = parent[at(u)]) {
      pred[at(u)] = pred[at(p)];
      pred_dir[at(u)] = static_cast<signed char>(-pred_dir[at(p)]);
      tmp_sc += succ_num[at(u)] - succ_num[at(p)];
      succ_num[at(u)] = tmp_sc;
      last_succ[at(p)] = tmp_ls;
    }
    pred[at(u_in_)] = in_arc_;
    pred_dir[at(u_in_)] = u_in_ == source_[at(in_arc_)] ? kDirUp : kDirDown;
    succ_num[at(u_in_)] = old_succ_num;
  }

  const int up_limit_out = last_succ[at(join_)] == v_in_ ? join_ : -1;
  const int last_succ_out = last_succ[at(u_out_)];
  for (int u = v_in_; u != -1 && last_succ[at(u)] == v_in_; u = parent[at(u)]) {
    last_succ[at(u)] = last_succ_out;
  }

  if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
    for (int u = v_out_; u != up_limit_out && last_succ[at(u)] == old_last_succ; u = parent[at(u)]) {
      last_succ[at(u)] = old_rev_thread;
    }
  } else if (last_succ_out != old_last_succ) {
    for (int u = v_out_; u != up_limit_out && last_succ[at(u)] == old_last_succ; u = parent[at(u)]) {
      last_succ[at(u)] = last_succ_out;
    }
  }

  for (int u = v_in_; u != join_; u = parent[at(u)]) succ_num[at(u)] += old_succ_num;
  for (int u = v_out_; u != join_; u = parent[at(u)]) succ_num[at(u)] -= old_succ_num;
}

void TransportSimplex::update_potential() {
  const auto in = static_cast<std::size_t>(in_arc_);
  const double sigma =
      pi_[static_cast<std::size_t>(v_in_)] - pi_[static_cast<std::size_t>(u_in_)] -
      pred_dir_[static_cast<std::size_t>(u_in_)] * cost_[in];
  const int end = thread_[static_cast<std::size_t>(last_succ_[static_cast<std::size_t>(u_in_)])];
  // Only potential differences matter, so shift whichever side of the cut is smaller.
  if (2 * succ_num_[static_cast<std::size_t>(u_in_)] <= node_num_ + 1) {
    for (int u = u_in_; u != end; u = thread_[static_cast<std::size_t>(u)]) pi_[static_cast<std::size_t>(u)] += sigma;
  } else {
    for (int u = end; u != u_in_; u = thread_[static_cast<std::size_t>(u)]) pi_[static_cast<std::size_t>(u)] -= sigma;
  }
}

}  // namespace wqlab::detail
