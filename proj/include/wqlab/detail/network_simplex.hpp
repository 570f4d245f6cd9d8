#pragma once

#include <cstdint>
#include <vector>

namespace wqlab::detail {

/// Primal network simplex for the uncapacitated transportation problem
/// between n sources and m targets with integer supplies.
///
/// The spanning-tree bookkeeping (thread / rev_thread / succ_num / last_succ)
/// and the block-search pivot follow the LEMON implementation. Flows are exact
/// integers; costs and potentials are doubles. The basis starts from
/// artificial arcs through a root node and real arcs may be appended at any
/// time: the current tree stays valid, so solve() resumes where it stopped.
/// This is what lets the caller price a large implicit arc set in rounds.
class TransportSimplex {
 public:
  /// `cost_bound` must dominate every arc cost that will ever be added.
  TransportSimplex(const std::vector<std::int64_t>& supply, const std::vector<std::int64_t>& demand,
                   double cost_bound);

  void add_arc(int source, int target, double cost);
  void reserve_arcs(std::size_t count);
  std::size_t arc_count() const { return source_.size() - static_cast<std::size_t>(first_real_); }

  /// Pivots until no real arc has reduced cost below -tolerance().
  void solve();
  /// Recomputes all potentials from the tree, removing accumulated drift.
  void refresh_potentials();

  double tolerance() const { return tolerance_; }
  /// Reduced cost of the (possibly absent) arc source -> target.
  double reduced_cost(int source, int target, double cost) const {
    return cost + pi_[static_cast<std::size_t>(source)] - pi_[static_cast<std::size_t>(n_ + target)];
  }
  double source_potential(int i) const { return pi_[static_cast<std::size_t>(i)]; }
  double target_potential(int j) const { return pi_[static_cast<std::size_t>(n_ + j)]; }

  bool artificial_flow() const;
  std::int64_t pivots() const { return pivots_; }

  /// Calls f(source, target, flow, cost) for real arcs carrying flow.
  template <typename F>
  void for_each_flow(F&& f) const {
    for (std::size_t e = static_cast<std::size_t>(first_real_); e < source_.size(); ++e) {
      if (flow_[e] > 0) f(source_[e], target_[e] - n_, flow_[e], cost_[e]);
    }
  }

 private:
  bool find_entering_arc();
  void find_join_node();
  void find_leaving_arc();
  void change_flow();
  void update_tree_structure();
  void update_potential();

  int n_ = 0;
  int m_ = 0;
  int node_num_ = 0;
  int root_ = 0;
  int first_real_ = 0;

  // arcs
  std::vector<int> source_;
  std::vector<int> target_;
  std::vector<double> cost_;
  std::vector<std::int64_t> flow_;
  std::vector<signed char> state_;

  // nodes
  std::vector<double> pi_;
  std::vector<int> parent_;
  std::vector<int> pred_;
  std::vector<int> thread_;
  std::vector<int> rev_thread_;
  std::vector<int> succ_num_;
  std::vector<int> last_succ_;
  std::vector<signed char> pred_dir_;
  std::vector<int> dirty_revs_;

  double tolerance_ = 0.0;
  int block_size_ = 10;
  std::size_t next_arc_ = 0;
  std::int64_t pivots_ = 0;

  // current pivot
  int in_arc_ = -1;
  int join_ = -1;
  int u_in_ = -1;
  int v_in_ = -1;
  int u_out_ = -1;
  int v_out_ = -1;
  std::int64_t delta_ = 0;
};

}  // namespace wqlab::detail
