#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drainsim/linalg.hpp"

namespace drainsim::channel {

using linalg::CMat;

enum class NodeKind { MBS, MUE, SBS, SUE };

struct Node {
  int id = 0;
  NodeKind kind = NodeKind::MBS;
  double x = 0.0, y = 0.0;  // meters
  int antennas = 0;
  bool indoor = false;
};

struct PlacementConfig {
  int n_mue = 0;
  int k_sbs = 0;
  double macro_radius_m = 650.0;
  double small_cell_radius_m = 20.0;
  double forbidden_macro_m = 50.0;
  double forbidden_sbs_m = 0.2;
  int mbs_antennas = 4;
  int sbs_antennas = 4;
  int ue_antennas = 2;
  double shadow_sigma_db = 10.0;
  double wall_loss_db = 12.0;
};

/// Node layout for one Monte Carlo trial. nodes[0] is the MBS; each SBS
/// serves exactly one SUE (served_sue, indexed like sbss).
struct Scenario {
  PlacementConfig cfg;
  std::uint64_t seed = 0;
  std::vector<Node> nodes;
  std::vector<int> mues;
  std::vector<int> sbss;
  std::vector<int> sues;
  std::vector<int> served_sue;  // served_sue[j] is the SUE of sbss[j]

  const Node& node(int id) const { return nodes.at(id); }
  int sue_of(int sbs_id) const;
};

struct LinkChannel {
  int tx = 0, rx = 0;
  int subchannel = 0;
  CMat h;  // rx.antennas x tx.antennas, linear scale
};

/// 3GPP-style outdoor loss: 15.3 + 37.6 log10(d [m]).
double path_loss_db(double d_m);

double distance(const Node& a, const Node& b);

/// Path loss + shadowing + wall penetration (12 dB on indoor<->outdoor links).
double total_loss_db(const PlacementConfig& cfg, const Node& tx, const Node& rx,
                     double shadow_db);

/// Deterministic lognormal shadowing draw for a link, N(0, sigma) in dB,
/// uncorrelated across links.
double shadow_draw_db(const Scenario& sc, int tx_id, int rx_id);

/// Deterministic loss of the link including the shadowing draw.
double link_loss_db(const Scenario& sc, int tx_id, int rx_id);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Rayleigh block-flat fading times sqrt of the linear link gain. Bit-exact
/// deterministic for a given (scenario seed, tx, rx, subchannel). When
/// compensate_loss is set the deterministic loss of this link is removed
/// (desired-link power control); fading is unchanged.
LinkChannel draw_channel(const Scenario& sc, int tx_id, int rx_id,
                         int subchannel, bool compensate_loss = false);

/// Uniform placement in the macrocell disc with re-draw on forbidden-radius
/// violations; throws std::runtime_error when placement keeps failing.
Scenario place_scenario(const PlacementConfig& cfg, std::uint64_t seed);

std::string dump_json(const Scenario& sc);
Scenario load_json(const std::string& text);

}  // namespace drainsim::channel
