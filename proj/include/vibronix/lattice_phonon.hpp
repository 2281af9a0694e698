// Toy harmonic lattices with point defects: mass-spring supercells, their
// dynamical matrix, eigenmodes, participation ratios and localized-mode
// classification.
#pragma once

#include "vibronix/vibronic_model.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vibronix::lattice {

struct Atom {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // Angstrom
  double mass_amu = 12.011;
  std::string tag = "bulk";
};

struct Spring {
  int i = 0;
  int j = 0;
  double stiffness = 0.0;  // eV / Angstrom^2
};

struct Boundary {
  bool periodic = false;
  Eigen::Matrix3d cell = Eigen::Matrix3d::Identity();  // columns are cell vectors
};

struct LatticeModel {
  int dimensions = 3;  // 1: displacements along x only
  std::vector<Atom> atoms;
  std::vector<Spring> springs;
  Boundary boundary;

  /// Positive masses and stiffnesses, valid distinct indices, no duplicate
  /// springs, connected spring graph. Throws DomainError.
  void validate() const;
  /// r_j - r_i, minimum image under periodic boundaries.
  Eigen::Vector3d bond_vector(int i, int j) const;
  std::size_t dof() const { return atoms.size() * static_cast<std::size_t>(dimensions); }
};

enum class LatticeKind { Chain, DiamondCubic };
enum class DefectKind { None, Vacancy, SplitInterstitial, TripleInterstitial, MassImpurity };

LatticeKind parse_lattice_kind(const std::string& name);
DefectKind parse_defect_kind(const std::string& name);
std::string defect_kind_name(DefectKind kind);

struct LatticeSpec {
  LatticeKind kind = LatticeKind::Chain;
  int size = 100;  // atoms for a chain, conventional cells per edge for diamond
  DefectKind defect = DefectKind::None;
  double defect_stiffness_scale = 1.0;
  bool periodic = false;
  double mass_amu = 12.011;
  double stiffness = 1.0;              // eV / Angstrom^2
  double chain_spacing = 1.5445;       // Angstrom
  double lattice_constant = 3.567;     // Angstrom, diamond conventional cell
  double impurity_mass_ratio = 0.5;    // m / M for MassImpurity
};

/// Nearest-neighbour spring network with the requested defect placed at the
/// site closest to the supercell centre. Springs touching defect atoms (or the
/// neighbours of a vacancy) are scaled by defect_stiffness_scale.
LatticeModel build_lattice(const LatticeSpec& spec);

struct PhononModes {
  std::vector<double> frequencies_mev;  // ascending
  Eigen::MatrixXd eigenvectors;         // mass-weighted, orthonormal columns
  std::vector<double> ipr;
  double band_max_mev = 0.0;            // bulk reference, 0 when unknown
  int n_atoms = 0;
  int dimensions = 3;
  int zero_modes = 0;
  double max_eigenvalue = 0.0;          // eV / (Angstrom^2 amu)
};

struct SolveOptions {
  double zero_tolerance = 1e-6;  // relative to the largest eigenvalue
};

/// Symmetric mass-weighted dynamical matrix (eV / (Angstrom^2 amu)).
Eigen::MatrixXd dynamical_matrix(const LatticeModel& model);

PhononModes solve_modes(const LatticeModel& model, const SolveOptions& options = {});

/// Normalized participation ratio (1/sum p_i^2)/N with p_i the per-atom weight.
/// 1 for a uniform mode, 1/N for a single-atom mode.
double ipr(const Eigen::Ref<const Eigen::VectorXd>& eigenvector, int dimensions);

struct LvmCandidate {
  int mode_index = 0;
  double frequency_mev = 0.0;
  double ipr = 0.0;
};

/// Modes above band_max with ipr below the threshold, by ascending frequency.
std::vector<LvmCandidate> classify_lvm(const PhononModes& modes, double band_max_mev, double ipr_threshold = 0.1);

/// omega_loc / omega_max = 1/sqrt(1 - eps^2) for a light impurity eps = (M - m)/M in a monatomic chain.
double chain_local_mode_frequency(double mass_ratio_eps);

/// f_min = v_s / size, returned in GHz for v in m/s and size in nm.
double nanoparticle_phonon_cutoff(double sound_velocity_m_s, double size_nm);

/// Highest frequency of the defect-free version of `spec`.
double reference_band_max(const LatticeSpec& spec);

/// Spring stiffness that places the defect-free band maximum at `target_mev`.
double calibrated_stiffness(const LatticeSpec& spec, double target_mev = 165.0);

/// Defect stiffness scale whose highest mode sits at `target_mev` (bisection
/// over [lo, hi]; the top frequency rises monotonically with the scale).
double calibrate_defect_scale(LatticeSpec spec, double target_mev, double lo = 1.0, double hi = 4.0);

/// Projects a Cartesian displacement (Angstrom per atom, dof() entries) onto
/// the non-zero modes: q_k = e_k . M^1/2 u.
std::vector<vibronic::ModeDisplacement> project_displacement(const LatticeModel& model, const PhononModes& modes,
                                                             const Eigen::VectorXd& displacement);

nlohmann::json to_json(const LatticeModel& model);
LatticeModel lattice_from_json(const nlohmann::json& j);

/// CSV: index,frequency_mev,ipr,is_lvm
void write_mode_table(const PhononModes& modes, const std::vector<LvmCandidate>& lvms,
                      const std::filesystem::path& path);

}  // namespace vibronix::lattice
