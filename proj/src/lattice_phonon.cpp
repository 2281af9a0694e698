#include "vibronix/lattice_phonon.hpp"

#include "vibronix/errors.hpp"
#include "vibronix/units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>

namespace vibronix::lattice {

LatticeKind parse_lattice_kind(const std::string& name) {
  if (name == "chain") return LatticeKind::Chain;
  if (name == "diamond_cubic" || name == "diamond") return LatticeKind::DiamondCubic;
  throw DomainError("unknown lattice kind '" + name + "'");
}

DefectKind parse_defect_kind(const std::string& name) {
  if (name == "none") return DefectKind::None;
  if (name == "vacancy") return DefectKind::Vacancy;
  if (name == "split_interstitial") return DefectKind::SplitInterstitial;
  if (name == "triple_interstitial") return DefectKind::TripleInterstitial;
  if (name == "mass_impurity") return DefectKind::MassImpurity;
  throw DomainError("unknown defect kind '" + name + "'");
}

std::string defect_kind_name(DefectKind kind) {
  switch (kind) {
    case DefectKind::None: return "none";
    case DefectKind::Vacancy: return "vacancy";
    case DefectKind::SplitInterstitial: return "split_interstitial";
    case DefectKind::TripleInterstitial: return "triple_interstitial";
    case DefectKind::MassImpurity: return "mass_impurity";
  }
  return "none";
}

Eigen::Vector3d LatticeModel::bond_vector(int i, int j) const {
  Eigen::Vector3d d = atoms[static_cast<std::size_t>(j)].position - atoms[static_cast<std::size_t>(i)].position;
  if (boundary.periodic) {
    Eigen::Vector3d f = boundary.cell.inverse() * d;
    for (int k = 0; k < 3; ++k) f(k) -= std::round(f(k));
    d = boundary.cell * f;
  }
  return d;
}

void LatticeModel::validate() const {
  if (dimensions != 1 && dimensions != 3) throw DomainError("dimensions must be 1 or 3");
  if (atoms.size() < 2) throw DomainError("lattice needs at least two atoms");
  for (const Atom& a : atoms) {
    if (!(a.mass_amu > 0.0)) throw DomainError("atom masses must be positive");
  }
  const auto n = static_cast<int>(atoms.size());
  std::set<std::pair<int, int>> seen;
  std::vector<std::vector<int>> adj(atoms.size());
  for (const Spring& s : springs) {
    if (s.i < 0 || s.j < 0 || s.i >= n || s.j >= n || s.i == s.j) throw DomainError("spring with invalid atom indices");
    if (!(s.stiffness > 0.0)) throw DomainError("spring stiffness must be positive");
    if (!seen.insert({std::min(s.i, s.j), std::max(s.i, s.j)}).second) {
      throw DomainError("duplicate spring between atoms " + std::to_string(s.i) + " and " + std::to_string(s.j));
    }
    if (dimensions == 3 && bond_vector(s.i, s.j).norm() < 1e-9) throw DomainError("spring of zero length");
    adj[static_cast<std::size_t>(s.i)].push_back(s.j);
    adj[static_cast<std::size_t>(s.j)].push_back(s.i);
  }
  std::vector<char> visited(atoms.size(), 0);
  std::queue<int> q;
  q.push(0);
  visited[0] = 1;
  std::size_t reached = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!visited[static_cast<std::size_t>(w)]) {
        visited[static_cast<std::size_t>(w)] = 1;
        ++reached;
        q.push(w);
      }
    }
  }
  if (reached != atoms.size()) {
    throw DomainError("spring graph is disconnected (" + std::to_string(reached) + " of " +
                      std::to_string(atoms.size()) + " atoms reachable)");
  }
}

namespace {

LatticeModel build_chain(const LatticeSpec& spec) {
  if (spec.size < 2) throw DomainError("chain needs at least 2 atoms");
  if (spec.periodic && spec.size < 3) throw DomainError("periodic chain needs at least 3 atoms");
  switch (spec.defect) {
    case DefectKind::None:
    case DefectKind::MassImpurity: break;
    default: throw DomainError("defect '" + defect_kind_name(spec.defect) + "' is not defined for a chain");
  }
  LatticeModel m;
  m.dimensions = 1;
  for (int i = 0; i < spec.size; ++i) {
    Atom a;
    a.position = Eigen::Vector3d(i * spec.chain_spacing, 0.0, 0.0);
    a.mass_amu = spec.mass_amu;
    m.atoms.push_back(a);
  }
  for (int i = 0; i + 1 < spec.size; ++i) m.springs.push_back({i, i + 1, spec.stiffness});
  if (spec.periodic) {
    m.springs.push_back({spec.size - 1, 0, spec.stiffness});
    m.boundary.periodic = true;
    m.boundary.cell = Eigen::Vector3d(spec.size * spec.chain_spacing, 1.0, 1.0).asDiagonal();
  }
  if (spec.defect == DefectKind::MassImpurity) {
    if (!(spec.impurity_mass_ratio > 0.0)) throw DomainError("impurity mass ratio must be positive");
    const std::size_t c = static_cast<std::size_t>(spec.size / 2);
    m.atoms[c].mass_amu = spec.mass_amu * spec.impurity_mass_ratio;
    m.atoms[c].tag = "impurity";
    for (Spring& s : m.springs) {
      if (s.i == static_cast<int>(c) || s.j == static_cast<int>(c)) s.stiffness *= spec.defect_stiffness_scale;
    }
  }
  return m;
}

LatticeModel build_diamond(const LatticeSpec& spec) {
  if (spec.size < 2) throw DomainError("diamond supercell needs at least 2 cells per dimension");
  const double a = spec.lattice_constant;
  const Eigen::Vector3d basis[8] = {{0, 0, 0},         {0, 0.5, 0.5},      {0.5, 0, 0.5},      {0.5, 0.5, 0},
                                    {0.25, 0.25, 0.25}, {0.25, 0.75, 0.75}, {0.75, 0.25, 0.75}, {0.75, 0.75, 0.25}};
  LatticeModel m;
  m.dimensions = 3;
  m.boundary.periodic = spec.periodic;
  m.boundary.cell = Eigen::Matrix3d::Identity() * (a * spec.size);
  for (int x = 0; x < spec.size; ++x) {
    for (int y = 0; y < spec.size; ++y) {
      for (int z = 0; z < spec.size; ++z) {
        for (const auto& b : basis) {
          Atom at;
          at.position = (Eigen::Vector3d(x, y, z) + b) * a;
          at.mass_amu = spec.mass_amu;
          m.atoms.push_back(at);
        }
      }
    }
  }
  const double nn = a * std::sqrt(3.0) / 4.0;
  const auto n = static_cast<int>(m.atoms.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(m.bond_vector(i, j).norm() - nn) < 1e-3) m.springs.push_back({i, j, spec.stiffness});
    }
  }

  // Defect site: atom nearest the supercell centre.
  const Eigen::Vector3d centre = Eigen::Vector3d::Constant(0.5 * a * spec.size);
  int site = 0;
  double best = 1e300;
  for (int i = 0; i < n; ++i) {
    const double d = (m.atoms[static_cast<std::size_t>(i)].position - centre).norm();
    if (d < best - 1e-9) {
      best = d;
      site = i;
    }
  }

  std::vector<int> neighbours;
  for (const Spring& s : m.springs) {
    if (s.i == site) neighbours.push_back(s.j);
    if (s.j == site) neighbours.push_back(s.i);
  }
  const Eigen::Vector3d origin = m.atoms[static_cast<std::size_t>(site)].position;

  auto remove_site = [&]() {
    std::vector<Spring> kept;
    for (Spring s : m.springs) {
      if (s.i == site || s.j == site) continue;
      if (s.i > site) --s.i;
      if (s.j > site) --s.j;
      kept.push_back(s);
    }
    m.springs = std::move(kept);
    m.atoms.erase(m.atoms.begin() + site);
    for (int& nb : neighbours) {
      if (nb > site) --nb;
    }
  };

  switch (spec.defect) {
    case DefectKind::None: break;
    case DefectKind::MassImpurity:
      m.atoms[static_cast<std::size_t>(site)].mass_amu *= spec.impurity_mass_ratio;
      m.atoms[static_cast<std::size_t>(site)].tag = "impurity";
      for (Spring& s : m.springs) {
        if (s.i == site || s.j == site) s.stiffness *= spec.defect_stiffness_scale;
      }
      break;
    case DefectKind::Vacancy: {
      remove_site();
      for (Spring& s : m.springs) {
        const bool touches = std::find(neighbours.begin(), neighbours.end(), s.i) != neighbours.end() ||
                             std::find(neighbours.begin(), neighbours.end(), s.j) != neighbours.end();
        if (touches) s.stiffness *= spec.defect_stiffness_scale;
      }
      for (int nb : neighbours) m.atoms[static_cast<std::size_t>(nb)].tag = "vacancy_neighbour";
      break;
    }
    case DefectKind::SplitInterstitial:
    case DefectKind::TripleInterstitial: {
      // [001] dumbbell, or a compact three-atom row along [110].
      std::vector<Eigen::Vector3d> offsets;
      if (spec.defect == DefectKind::SplitInterstitial) {
        offsets = {{0, 0, 0.63}, {0, 0, -0.63}};
      } else {
        const Eigen::Vector3d dir = Eigen::Vector3d(1, 1, 0).normalized() * 1.30;
        offsets = {-dir, Eigen::Vector3d::Zero(), dir};
      }
      remove_site();
      const int first = static_cast<int>(m.atoms.size());
      for (const auto& off : offsets) {
        Atom at;
        at.position = origin + off;
        at.mass_amu = spec.mass_amu;
        at.tag = "interstitial";
        m.atoms.push_back(at);
      }
      const double k = spec.stiffness * spec.defect_stiffness_scale;
      for (int d = 0; d + 1 < static_cast<int>(offsets.size()); ++d) m.springs.push_back({first + d, first + d + 1, k});
      for (int nb : neighbours) {
        int nearest = first;
        double dmin = 1e300;
        for (int d = 0; d < static_cast<int>(offsets.size()); ++d) {
          const double dist = m.bond_vector(nb, first + d).norm();
          if (dist < dmin - 1e-9) {
            dmin = dist;
            nearest = first + d;
          }
        }
        m.springs.push_back({nb, nearest, k});
      }
      break;
    }
  }
  return m;
}

}  // namespace

LatticeModel build_lattice(const LatticeSpec& spec) {
  if (!(spec.defect_stiffness_scale > 0.0)) throw DomainError("defect stiffness scale must be positive");
  if (!(spec.stiffness > 0.0) || !(spec.mass_amu > 0.0)) throw DomainError("stiffness and mass must be positive");
  LatticeModel m = spec.kind == LatticeKind::Chain ? build_chain(spec) : build_diamond(spec);
  m.validate();
  return m;
}

Eigen::MatrixXd dynamical_matrix(const LatticeModel& model) {
  const int dim = model.dimensions;
  const auto n = static_cast<Eigen::Index>(model.dof());
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, n);
  for (const Spring& s : model.springs) {
    Eigen::MatrixXd block(dim, dim);
    if (dim == 1) {
      block(0, 0) = s.stiffness;
    } else {
      const Eigen::Vector3d e = model.bond_vector(s.i, s.j).normalized();
      block = s.stiffness * e * e.transpose();
    }
    const Eigen::Index bi = s.i * dim, bj = s.j * dim;
    phi.block(bi, bi, dim, dim) += block;
    phi.block(bj, bj, dim, dim) += block;
    phi.block(bi, bj, dim, dim) -= block;
    phi.block(bj, bi, dim, dim) -= block;
  }
  Eigen::VectorXd inv_sqrt_m(n);
  for (std::size_t a = 0; a < model.atoms.size(); ++a) {
    for (int k = 0; k < dim; ++k) {
      inv_sqrt_m(static_cast<Eigen::Index>(a) * dim + k) = 1.0 / std::sqrt(model.atoms[a].mass_amu);
    }
  }
  return inv_sqrt_m.asDiagonal() * phi * inv_sqrt_m.asDiagonal();
}

double ipr(const Eigen::Ref<const Eigen::VectorXd>& eigenvector, int dimensions) {
  if (dimensions < 1 || eigenvector.size() % dimensions != 0) throw DomainError("eigenvector length mismatch");
  const double norm2 = eigenvector.squaredNorm();
  if (std::abs(norm2 - 1.0) > 1e-8) throw DomainError("eigenvector is not normalized");
  const Eigen::Index n_atoms = eigenvector.size() / dimensions;
  double sum_p2 = 0.0;
  for (Eigen::Index a = 0; a < n_atoms; ++a) {
    const double p = eigenvector.segment(a * dimensions, dimensions).squaredNorm();
    sum_p2 += p * p;
  }
  return 1.0 / (sum_p2 * static_cast<double>(n_atoms));
}

PhononModes solve_modes(const LatticeModel& model, const SolveOptions& options) {
  model.validate();
  const Eigen::MatrixXd d = dynamical_matrix(model);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  const Eigen::VectorXd& lam = eig.eigenvalues();
  PhononModes modes;
  modes.n_atoms = static_cast<int>(model.atoms.size());
  modes.dimensions = model.dimensions;
  modes.max_eigenvalue = lam.cwiseAbs().maxCoeff();
  const double tol = options.zero_tolerance * modes.max_eigenvalue;
  modes.eigenvectors = eig.eigenvectors();
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam(k) < -tol) {
      throw DomainError("negative eigenvalue " + std::to_string(lam(k)) + ": geometry is not an equilibrium");
    }
    double f = 0.0;
    if (lam(k) > tol) {
      f = units::spring_frequency_mev(lam(k));
    } else {
      ++modes.zero_modes;
    }
    modes.frequencies_mev.push_back(f);
    modes.ipr.push_back(ipr(modes.eigenvectors.col(k), model.dimensions));
  }
  return modes;
}

std::vector<LvmCandidate> classify_lvm(const PhononModes& modes, double band_max_mev, double ipr_threshold) {
  if (!(band_max_mev > 0.0)) throw DomainError("band maximum must be positive");
  std::vector<LvmCandidate> out;
  for (std::size_t k = 0; k < modes.frequencies_mev.size(); ++k) {
    if (modes.frequencies_mev[k] > band_max_mev && modes.ipr[k] < ipr_threshold) {
      out.push_back({static_cast<int>(k), modes.frequencies_mev[k], modes.ipr[k]});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.frequency_mev < y.frequency_mev; });
  return out;
}

double chain_local_mode_frequency(double mass_ratio_eps) {
  if (!(mass_ratio_eps > 0.0 && mass_ratio_eps < 1.0)) throw DomainError("mass defect eps must lie in (0, 1)");
  return 1.0 / std::sqrt(1.0 - mass_ratio_eps * mass_ratio_eps);
}

double nanoparticle_phonon_cutoff(double sound_velocity_m_s, double size_nm) {
  if (!(sound_velocity_m_s > 0.0) || !(size_nm > 0.0)) throw DomainError("velocity and size must be positive");
  return sound_velocity_m_s / size_nm;  // (m/s) / (1e-9 m) = 1e9 Hz
}

double reference_band_max(const LatticeSpec& spec) {
  LatticeSpec ref = spec;
  ref.defect = DefectKind::None;
  ref.defect_stiffness_scale = 1.0;
  const PhononModes modes = solve_modes(build_lattice(ref));
  return modes.frequencies_mev.back();
}

double calibrated_stiffness(const LatticeSpec& spec, double target_mev) {
  if (!(target_mev > 0.0)) throw DomainError("target band maximum must be positive");
  const double current = reference_band_max(spec);
  return spec.stiffness * (target_mev / current) * (target_mev / current);
}

double calibrate_defect_scale(LatticeSpec spec, double target_mev, double lo, double hi) {
  auto top = [&](double scale) {
    spec.defect_stiffness_scale = scale;
    return solve_modes(build_lattice(spec)).frequencies_mev.back();
  };
  double f_lo = top(lo), f_hi = top(hi);
  if (!(f_lo <= target_mev && target_mev <= f_hi)) {
    throw DomainError("target frequency outside the range reachable by the stiffness scale bracket");
  }
  for (int it = 0; it < 60 && hi - lo > 1e-6 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = top(mid);
    if (f < target_mev) {
      lo = mid;
      f_lo = f;
    } else {
      hi = mid;
      f_hi = f;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<vibronic::ModeDisplacement> project_displacement(const LatticeModel& model, const PhononModes& modes,
                                                             const Eigen::VectorXd& displacement) {
  const auto n = static_cast<Eigen::Index>(model.dof());
  if (displacement.size() != n) throw DomainError("displacement length must equal the degrees of freedom");
  Eigen::VectorXd weighted(n);
  for (std::size_t a = 0; a < model.atoms.size(); ++a) {
    for (int k = 0; k < model.dimensions; ++k) {
      const auto idx = static_cast<Eigen::Index>(a) * model.dimensions + k;
      weighted(idx) = std::sqrt(model.atoms[a].mass_amu) * displacement(idx);
    }
  }
  std::vector<vibronic::ModeDisplacement> out;
  for (Eigen::Index k = 0; k < modes.eigenvectors.cols(); ++k) {
    const double f = modes.frequencies_mev[static_cast<std::size_t>(k)];
    if (f <= 0.0) continue;
    out.push_back({f, modes.eigenvectors.col(k).dot(weighted)});
  }
  return out;
}

nlohmann::json to_json(const LatticeModel& model) {
  nlohmann::json j;
  j["schema"] = "vibronix/1";
  j["dimensions"] = model.dimensions;
  if (model.boundary.periodic) {
    nlohmann::json cell = nlohmann::json::array();
    for (int c = 0; c < 3; ++c) {
      cell.push_back({model.boundary.cell(0, c), model.boundary.cell(1, c), model.boundary.cell(2, c)});
    }
    j["boundary"] = {{"type", "periodic"}, {"cell", cell}};
  } else {
    j["boundary"] = {{"type", "free"}};
  }
  nlohmann::json atoms = nlohmann::json::array();
  for (const Atom& a : model.atoms) {
    atoms.push_back({{"position", {a.position.x(), a.position.y(), a.position.z()}}, {"mass", a.mass_amu}, {"tag", a.tag}});
  }
  j["atoms"] = atoms;
  nlohmann::json springs = nlohmann::json::array();
  for (const Spring& s : model.springs) springs.push_back({{"i", s.i}, {"j", s.j}, {"stiffness", s.stiffness}});
  j["springs"] = springs;
  return j;
}

LatticeModel lattice_from_json(const nlohmann::json& j) {
  LatticeModel m;
  try {
    m.dimensions = j.at("dimensions").get<int>();
    const auto& b = j.at("boundary");
    const std::string type = b.at("type").get<std::string>();
    if (type == "periodic") {
      m.boundary.periodic = true;
      const auto& cell = b.at("cell");
      for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 3; ++r) m.boundary.cell(r, c) = cell.at(c).at(r).get<double>();
      }
    } else if (type != "free") {
      throw DomainError("boundary type must be 'free' or 'periodic'");
    }
    for (const auto& a : j.at("atoms")) {
      Atom at;
      const auto& p = a.at("position");
      at.position = Eigen::Vector3d(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
      at.mass_amu = a.at("mass").get<double>();
      at.tag = a.value("tag", std::string("bulk"));
      m.atoms.push_back(at);
    }
    for (const auto& s : j.at("springs")) {
      m.springs.push_back({s.at("i").get<int>(), s.at("j").get<int>(), s.at("stiffness").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed lattice JSON: ") + e.what());
  }
  m.validate();
  return m;
}

void write_mode_table(const PhononModes& modes, const std::vector<LvmCandidate>& lvms,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "index,frequency_mev,ipr,is_lvm\n";
  out.precision(10);
  for (std::size_t k = 0; k < modes.frequencies_mev.size(); ++k) {
    const bool lvm = std::any_of(lvms.begin(), lvms.end(), [k](const auto& c) { return c.mode_index == static_cast<int>(k); });
    out << k << ',' << modes.frequencies_mev[k] << ',' << modes.ipr[k] << ',' << (lvm ? 1 : 0) << '\n';
  }
}

}  // namespace vibronix::lattice
