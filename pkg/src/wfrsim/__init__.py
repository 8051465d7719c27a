"""Waveform-relaxation simulation of gap-junction coupled spiking point neurons."""

from .model import (NeuronParams, NeuronState, SpikeShapeTemplate,
                    apply_spike, build_spike_template, detect_threshold_crossing,
                    gap_current, hh_rhs, resting_state, template_extrapolate,
                    zero_input_rest)
from .network import (GapJunction, Network, Neuron, Recording, SimulationConfig,
                      SpikeBuffer, SpikeConnection, build_scaled_network,
                      min_delay, simulate)
from .rk import (DORMAND_PRINCE54, FEHLBERG45, ButcherTableau, GridSolution,
                 StepController, StepSizeUnderflowError, adapt_step,
                 integrate_fixed, integrate_interval, rk_step)
from .waveform import (ConstantWaveform, HermiteWaveform, TemplateWaveform,
                       Waveform, WaveformSegment, constant_waveform,
                       eval_waveform, hermite_basis, initial_guess,
                       waveform_max_diff)
from .wfr import (ConfigurationError, IterationStats, RelaxationEngine,
                  SolverFailureError, ToyWaveformRelaxation, WfrConfig,
                  converged, non_iterative_interval, run_interval,
                  solve_subsystem)

__version__ = "0.1.0"
