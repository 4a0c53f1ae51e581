//! A device bound to a truncation: builds Hamiltonians and dressed frames at any bias.

use crate::device::{DeviceParams, GateKind, OperatingPoint};
use crate::error::Result;
use crate::linalg::{to_complex, CMat, RMat};
use crate::qutrit::{DressedBasis, HamiltonianBuilder, Space, SystemFrequencies};

#[derive(Clone, Debug)]
pub struct System {
    pub device: DeviceParams,
    pub builder: HamiltonianBuilder,
}

impl System {
    /// Three-level qubits with `coupler_levels` coupler levels.
    pub fn new(device: DeviceParams, coupler_levels: usize) -> Result<Self> {
        Ok(Self::with_space(device, Space::new(3, coupler_levels)?, false))
    }

    pub fn qutrits(device: DeviceParams) -> Self {
        Self::with_space(device, Space::qutrits(), false)
    }

    pub fn with_space(device: DeviceParams, space: Space, rotating_wave: bool) -> Self {
        System {
            device,
            builder: HamiltonianBuilder::with_options(space, rotating_wave),
        }
    }

    pub fn space(&self) -> Space {
        self.builder.space
    }

    pub fn dim(&self) -> usize {
        self.builder.space.dim()
    }

    pub fn frequencies(&self, f1: f64, fc: f64, f2: f64) -> SystemFrequencies {
        self.device.system_at(f1, fc, f2)
    }

    /// H in rad/ns with couplings recomputed at (f1, fc, f2).
    pub fn hamiltonian_real(&self, f1: f64, fc: f64, f2: f64) -> RMat {
        self.builder.build_real(&self.frequencies(f1, fc, f2))
    }

    pub fn hamiltonian(&self, f1: f64, fc: f64, f2: f64) -> CMat {
        to_complex(&self.hamiltonian_real(f1, fc, f2))
    }

    /// H with the couplings carried by `op` (not recomputed).
    pub fn hamiltonian_op(&self, op: &OperatingPoint) -> CMat {
        self.builder.build(&self.device.frequencies(op))
    }

    pub fn dressed(&self, f1: f64, fc: f64, f2: f64) -> Result<DressedBasis> {
        DressedBasis::new(&self.hamiltonian(f1, fc, f2), self.space())
    }

    pub fn idle_frame(&self, gate: GateKind) -> Result<DressedBasis> {
        let b = self.device.idle_bias(gate);
        self.dressed(b.f1, b.fc, b.f2)
    }
}
