"""Molecular dynamics of Doppler laser cooling for 3D ion crystals in a
Penning trap: trap/Coulomb forces, a cyclotronic symplectic integrator,
stochastic photon scattering, equilibrium search, thermal initialization,
normal-mode analysis, and an experiment pipeline with scans and checkpoints.
"""

__version__ = "0.1.0"

from .constants import (COULOMB_K, ELEMENTARY_CHARGE, EPSILON_0, HBAR,
                        K_BOLTZMANN, SPEED_OF_LIGHT)
from .model import (BERYLLIUM_9, LAB, ROTATING, BeamConfig, DerivedQuantities,
                    FrameError, IonSpecies, SimConfig, SystemState, TrapConfig,
                    check_timestep, derived_quantities, lab_to_rotating,
                    rotating_to_lab)
from .forces import (ForceField, SingularConfigurationError, coulomb_direct,
                     rotating_frame_energy, rotating_spring_constants,
                     total_potential_energy, trap_wall_force, trap_wall_potential)
from .treecode import coulomb_tree
from .integrator import cyclotronic_step, run_lab, run_rotating, verlet_step
from .cooling import (BeamSet, cooling_kick, default_beams, sample_photon_count,
                      sample_photon_counts, saturation, scattering_rate)
from .equilibrium import (ConfinementError, EquilibriumResult, damped_relax,
                          fluid_extents, local_equilibrium, quasi_newton_refine,
                          seed_cloud, spheroid_aspect_ratio)
from .thermalize import (ThermalizeConfig, langevin_thermalize, mh_position_init,
                         sample_mb_velocities, thermalize_state)
from .modes import (AXIAL, CYCLOTRON, EXB, Linearization, ModeSet, axial_fraction,
                    build_linearization, classify_branches, mode_energies,
                    pe_ke_ratio, project_amplitudes, reconstruct_state, solve_modes)
from .diagnostics import (ConfinementReport, GapEstimates, TemperatureSample,
                          crystal_extents, dispersion_relation, doppler_limit,
                          gap_estimates, ke_temperatures, pe_temperature,
                          rms_displacement)
from .harness import (CoolingRecord, ExperimentSpec, ScanSpec, load_spec,
                      parse_spec_text, run_pipeline, run_scan, spec_from_dict,
                      spec_hash)
