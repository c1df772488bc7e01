use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Feature maps indexed by output time, preferred direction θ and phase φ.
///
/// `times[i]` is the frame index (in the source sequence) of the `i`-th time
/// slice. Maps are stored time-major, then direction, then phase.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalStack {
    directions: Vec<f64>,
    phases: Vec<f64>,
    times: Vec<usize>,
    maps: Vec<Raster>,
}

impl DirectionalStack {
    pub fn new(directions: Vec<f64>, phases: Vec<f64>, times: Vec<usize>, maps: Vec<Raster>) -> Result<Self> {
        let expected = directions.len() * phases.len() * times.len();
        if maps.len() != expected {
            return Err(Error::invalid(format!(
                "stack needs {expected} maps ({} times x {} directions x {} phases), got {}",
                times.len(),
                directions.len(),
                phases.len(),
                maps.len()
            )));
        }
        if let Some(first) = maps.first() {
            for m in &maps[1..] {
                first.check_same_dims(m)?;
            }
        }
        let stack = DirectionalStack { directions, phases, times, maps };
        stack.quadrature_pair()?;
        Ok(stack)
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn maps(&self) -> &[Raster] {
        &self.maps
    }

    pub fn get(&self, time_idx: usize, dir: usize, phase: usize) -> &Raster {
        &self.maps[self.index(time_idx, dir, phase)]
    }

    fn index(&self, time_idx: usize, dir: usize, phase: usize) -> usize {
        (time_idx * self.directions.len() + dir) * self.phases.len() + phase
    }

    /// Indices `(i, j)` of the first phase pair with `φ_j = φ_i + π/2 (mod 2π)`.
    pub fn quadrature_pair(&self) -> Result<(usize, usize)> {
        for (i, &a) in self.phases.iter().enumerate() {
            for (j, &b) in self.phases.iter().enumerate() {
                let d = (b - a - FRAC_PI_2).rem_euclid(std::f64::consts::TAU);
                if d < 1e-9 || (std::f64::consts::TAU - d) < 1e-9 {
                    return Ok((i, j));
                }
            }
        }
        Err(Error::MissingQuadrature(self.phases.first().copied().unwrap_or(0.0)))
    }

    /// Applies `f` to every map, keeping the layout.
    pub fn map_each(&self, f: impl Fn(&Raster) -> Raster + Sync + Send) -> DirectionalStack {
        use rayon::prelude::*;
        DirectionalStack {
            directions: self.directions.clone(),
            phases: self.phases.clone(),
            times: self.times.clone(),
            maps: self.maps.par_iter().map(f).collect(),
        }
    }
}
