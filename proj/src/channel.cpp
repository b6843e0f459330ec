#include "drainsim/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace drainsim::channel {

namespace {

// splitmix64; channel draws must be bit-identical across compilers, so the
// generator and the Gaussian transform are hand-rolled rather than taken
// from <random>.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double u01() {  // (0, 1)
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller pair of independent N(0,1) draws.
  std::pair<double, double> gauss2() {
    const double u = u01();
    const double v = u01();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double t = 2.0 * std::numbers::pi * v;
    return {r * std::cos(t), r * std::sin(t)};
  }
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  Rng r(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
  return r.next();
}

std::uint64_t link_key(std::uint64_t seed, std::uint64_t tag, int a, int b,
                       int c = 0) {
  std::uint64_t k = mix(seed, tag);
  k = mix(k, static_cast<std::uint64_t>(a) + 1);
  k = mix(k, static_cast<std::uint64_t>(b) + 1);
  k = mix(k, static_cast<std::uint64_t>(c) + 1);
  return k;
}

constexpr std::uint64_t kShadowTag = 0x5348414457ULL;
constexpr std::uint64_t kFadingTag = 0x46414445ULL;
constexpr std::uint64_t kPlaceTag = 0x504c414345ULL;

}  // namespace

int Scenario::sue_of(int sbs_id) const {
  for (std::size_t j = 0; j < sbss.size(); ++j) {
    if (sbss[j] == sbs_id) return served_sue[j];
  }
  throw std::out_of_range("sue_of: unknown SBS id");
}

double path_loss_db(double d_m) {
  if (d_m <= 0.0) throw std::invalid_argument("path_loss_db: d <= 0");
  return 15.3 + 37.6 * std::log10(d_m);
}

double distance(const Node& a, const Node& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double total_loss_db(const PlacementConfig& cfg, const Node& tx, const Node& rx,
                     double shadow_db) {
  double loss = path_loss_db(distance(tx, rx)) + shadow_db;
  if (tx.indoor != rx.indoor) loss += cfg.wall_loss_db;
  return loss;
}

double shadow_draw_db(const Scenario& sc, int tx_id, int rx_id) {
  // Symmetric in the endpoints (large-scale effect of the shared path).
  const int a = std::min(tx_id, rx_id);
  const int b = std::max(tx_id, rx_id);
  Rng rng(link_key(sc.seed, kShadowTag, a, b));
  return sc.cfg.shadow_sigma_db * rng.gauss2().first;
}

double link_loss_db(const Scenario& sc, int tx_id, int rx_id) {
  return total_loss_db(sc.cfg, sc.node(tx_id), sc.node(rx_id),
                       shadow_draw_db(sc, tx_id, rx_id));
}

LinkChannel draw_channel(const Scenario& sc, int tx_id, int rx_id,
                         int subchannel, bool compensate_loss) {
  const Node& tx = sc.node(tx_id);
  const Node& rx = sc.node(rx_id);
  const double gain =
      compensate_loss ? 1.0 : db_to_linear(-link_loss_db(sc, tx_id, rx_id));
  const double amp = std::sqrt(gain);

  Rng rng(link_key(sc.seed, kFadingTag, tx_id, rx_id, subchannel));
  LinkChannel lc;
  lc.tx = tx_id;
  lc.rx = rx_id;
  lc.subchannel = subchannel;
  lc.h.resize(rx.antennas, tx.antennas);
  const double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
  for (int r = 0; r < rx.antennas; ++r) {
    for (int c = 0; c < tx.antennas; ++c) {
      auto [re, im] = rng.gauss2();
      lc.h(r, c) = amp * inv_sqrt2 * linalg::Complex(re, im);
    }
  }
  return lc;
}

Scenario place_scenario(const PlacementConfig& cfg, std::uint64_t seed) {
  if (cfg.n_mue < 0 || cfg.k_sbs < 0) {
    throw std::invalid_argument("place_scenario: negative counts");
  }
  constexpr int kMaxAttempts = 10000;

  Scenario sc;
  sc.cfg = cfg;
  sc.seed = seed;
  Rng rng(mix(seed, kPlaceTag));

  auto draw_in_disc = [&](double cx, double cy, double radius) {
    const double r = radius * std::sqrt(rng.u01());
    const double t = 2.0 * std::numbers::pi * rng.u01();
    return std::pair<double, double>{cx + r * std::cos(t),
                                     cy + r * std::sin(t)};
  };

  Node mbs{0, NodeKind::MBS, 0.0, 0.0, cfg.mbs_antennas, false};
  sc.nodes.push_back(mbs);

  auto place_in_macro = [&](NodeKind kind, int antennas, bool indoor) {
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      auto [x, y] = draw_in_disc(0.0, 0.0, cfg.macro_radius_m);
      if (std::hypot(x, y) < cfg.forbidden_macro_m) continue;
      Node n{static_cast<int>(sc.nodes.size()), kind, x, y, antennas, indoor};
      bool ok = true;
      for (const Node& other : sc.nodes) {
        if (other.kind == NodeKind::SBS || kind == NodeKind::SBS) {
          if (distance(n, other) < cfg.forbidden_sbs_m && other.id != 0) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) continue;
      sc.nodes.push_back(n);
      return n.id;
    }
    throw std::runtime_error("place_scenario: placement failed after bounded re-draws");
  };

  for (int i = 0; i < cfg.n_mue; ++i) {
    sc.mues.push_back(place_in_macro(NodeKind::MUE, cfg.ue_antennas, false));
  }
  for (int k = 0; k < cfg.k_sbs; ++k) {
    sc.sbss.push_back(place_in_macro(NodeKind::SBS, cfg.sbs_antennas, true));
  }
  // One SUE per SBS, uniform inside the small cell, outside the SBS
  // forbidden radius.
  for (int sbs_id : sc.sbss) {
    const Node& sbs = sc.node(sbs_id);
    int attempt = 0;
    for (; attempt < kMaxAttempts; ++attempt) {
      auto [x, y] = draw_in_disc(sbs.x, sbs.y, cfg.small_cell_radius_m);
      if (std::hypot(x - sbs.x, y - sbs.y) < cfg.forbidden_sbs_m) continue;
      Node sue{static_cast<int>(sc.nodes.size()), NodeKind::SUE, x, y,
               cfg.ue_antennas, true};
      sc.nodes.push_back(sue);
      sc.sues.push_back(sue.id);
      sc.served_sue.push_back(sue.id);
      break;
    }
    if (attempt == kMaxAttempts) {
      throw std::runtime_error("place_scenario: SUE placement failed");
    }
  }
  return sc;
}

namespace {

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::MBS: return "MBS";
    case NodeKind::MUE: return "MUE";
    case NodeKind::SBS: return "SBS";
    case NodeKind::SUE: return "SUE";
  }
  return "?";
}

NodeKind kind_from(const std::string& s) {
  if (s == "MBS") return NodeKind::MBS;
  if (s == "MUE") return NodeKind::MUE;
  if (s == "SBS") return NodeKind::SBS;
  if (s == "SUE") return NodeKind::SUE;
  throw std::invalid_argument("unknown node kind: " + s);
}

}  // namespace

std::string dump_json(const Scenario& sc) {
  nlohmann::json j;
  j["seed"] = sc.seed;
  j["config"] = {{"n_mue", sc.cfg.n_mue},
                 {"k_sbs", sc.cfg.k_sbs},
                 {"macro_radius_m", sc.cfg.macro_radius_m},
                 {"small_cell_radius_m", sc.cfg.small_cell_radius_m},
                 {"forbidden_macro_m", sc.cfg.forbidden_macro_m},
                 {"forbidden_sbs_m", sc.cfg.forbidden_sbs_m},
                 {"mbs_antennas", sc.cfg.mbs_antennas},
                 {"sbs_antennas", sc.cfg.sbs_antennas},
                 {"ue_antennas", sc.cfg.ue_antennas},
                 {"shadow_sigma_db", sc.cfg.shadow_sigma_db},
                 {"wall_loss_db", sc.cfg.wall_loss_db}};
  j["nodes"] = nlohmann::json::array();
  for (const Node& n : sc.nodes) {
    j["nodes"].push_back({{"id", n.id},
                          {"kind", kind_name(n.kind)},
                          {"x", n.x},
                          {"y", n.y},
                          {"antennas", n.antennas},
                          {"indoor", n.indoor}});
  }
  j["mues"] = sc.mues;
  j["sbss"] = sc.sbss;
  j["sues"] = sc.sues;
  j["served_sue"] = sc.served_sue;
  return j.dump(2);
}

Scenario load_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Scenario sc;
  sc.seed = j.at("seed").get<std::uint64_t>();
  const auto& c = j.at("config");
  sc.cfg.n_mue = c.at("n_mue");
  sc.cfg.k_sbs = c.at("k_sbs");
  sc.cfg.macro_radius_m = c.at("macro_radius_m");
  sc.cfg.small_cell_radius_m = c.at("small_cell_radius_m");
  sc.cfg.forbidden_macro_m = c.at("forbidden_macro_m");
  sc.cfg.forbidden_sbs_m = c.at("forbidden_sbs_m");
  sc.cfg.mbs_antennas = c.at("mbs_antennas");
  sc.cfg.sbs_antennas = c.at("sbs_antennas");
  sc.cfg.ue_antennas = c.at("ue_antennas");
  sc.cfg.shadow_sigma_db = c.at("shadow_sigma_db");
  sc.cfg.wall_loss_db = c.at("wall_loss_db");
  for (const auto& n : j.at("nodes")) {
    sc.nodes.push_back(Node{n.at("id"), kind_from(n.at("kind")), n.at("x"),
                            n.at("y"), n.at("antennas"), n.at("indoor")});
  }
  sc.mues = j.at("mues").get<std::vector<int>>();
  sc.sbss = j.at("sbss").get<std::vector<int>>();
  sc.sues = j.at("sues").get<std::vector<int>>();
  sc.served_sue = j.at("served_sue").get<std::vector<int>>();
  return sc;
}

}  // namespace drainsim::channel
