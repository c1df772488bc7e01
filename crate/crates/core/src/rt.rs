//! Rt layer: motion energy, flicker normalization, pooling, directional
//! integration and localization.

use serde::{Deserialize, Serialize};

use crate::config::FlickerNorm;
use crate::conv;
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::stack::DirectionalStack;

/// Guards the flicker denominator.
pub const KAPPA: f64 = 1e-6;

/// Non-negative energy maps indexed by time, then direction.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyStack {
    directions: Vec<f64>,
    times: Vec<usize>,
    maps: Vec<Raster>,
}

impl EnergyStack {
    pub fn new(directions: Vec<f64>, times: Vec<usize>, maps: Vec<Raster>) -> Result<Self> {
        if maps.len() != directions.len() * times.len() {
            return Err(Error::invalid(format!(
                "energy stack needs {} maps, got {}",
                directions.len() * times.len(),
                maps.len()
            )));
        }
        if maps.iter().any(|m| m.data().iter().any(|&v| v < 0.0)) {
            return Err(Error::invalid("energy maps must be non-negative"));
        }
        Ok(EnergyStack { directions, times, maps })
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn maps(&self) -> &[Raster] {
        &self.maps
    }

    pub fn get(&self, time_idx: usize, dir: usize) -> &Raster {
        &self.maps[time_idx * self.directions.len() + dir]
    }

    /// The per-direction maps of one time slice.
    pub fn slice(&self, time_idx: usize) -> &[Raster] {
        let n = self.directions.len();
        &self.maps[time_idx * n..(time_idx + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x: usize,
    pub y: usize,
    pub t: usize,
    pub score: f64,
}

/// `sqrt(a² + b²)` pixelwise.
pub fn quadrature_energy(a: &Raster, b: &Raster) -> Raster {
    a.zip_map(b, f64::hypot).expect("quadrature maps share dims")
}

pub fn motion_energy(stack: &DirectionalStack) -> Result<EnergyStack> {
    let (p0, p1) = stack.quadrature_pair()?;
    let mut maps = Vec::with_capacity(stack.times().len() * stack.directions().len());
    for ti in 0..stack.times().len() {
        for d in 0..stack.directions().len() {
            maps.push(quadrature_energy(stack.get(ti, d, p0), stack.get(ti, d, p1)));
        }
    }
    Ok(EnergyStack { directions: stack.directions().to_vec(), times: stack.times().to_vec(), maps })
}

/// Normalizes the direction maps of one time slice in place.
pub fn normalize_slice(maps: &mut [Raster], mode: FlickerNorm) {
    if maps.is_empty() {
        return;
    }
    let n = maps.len() as f64;
    match mode {
        FlickerNorm::Global => {
            let total: f64 = maps.iter().map(|m| m.data().iter().sum::<f64>()).sum();
            let flk = total / (n * maps[0].data().len() as f64);
            for m in maps.iter_mut() {
                m.data_mut().iter_mut().for_each(|v| *v /= flk + KAPPA);
            }
        }
        FlickerNorm::PerPixel => {
            let len = maps[0].data().len();
            for i in 0..len {
                let flk = maps.iter().map(|m| m.data()[i]).sum::<f64>() / n;
                for m in maps.iter_mut() {
                    m.data_mut()[i] /= flk + KAPPA;
                }
            }
        }
    }
}

pub fn flicker_normalize(energy: &EnergyStack, mode: FlickerNorm) -> EnergyStack {
    let mut out = energy.clone();
    let n = out.directions.len();
    if n > 0 {
        for slice in out.maps.chunks_mut(n) {
            normalize_slice(slice, mode);
        }
    }
    out
}

/// Max-pools each direction map and sums them with weights `alpha`.
pub fn combine_slice(maps: &[Raster], alpha: &[f64], pool_size: usize) -> Result<Raster> {
    if alpha.len() != maps.len() {
        return Err(Error::invalid(format!("{} weights for {} directions", alpha.len(), maps.len())));
    }
    if pool_size == 0 {
        return Err(Error::invalid("pool_size must be at least 1"));
    }
    if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::invalid("direction weights must be finite and non-negative"));
    }
    let (w, h) = maps.first().map(Raster::dims).ok_or_else(|| Error::invalid("no direction maps"))?;
    let mut out = vec![0.0; w * h];
    for (m, &a) in maps.iter().zip(alpha) {
        let pooled = conv::max_pool(m, pool_size);
        for (o, v) in out.iter_mut().zip(pooled.data()) {
            *o += a * v;
        }
    }
    Ok(Raster::from_vec_unchecked(w, h, out))
}

pub fn pool_and_combine(energy: &EnergyStack, alpha: &[f64], pool_size: usize) -> Result<Vec<Raster>> {
    (0..energy.times.len()).map(|ti| combine_slice(energy.slice(ti), alpha, pool_size)).collect()
}

/// Regional maxima of `map` scoring above `floor`, best first.
///
/// A maximum is a connected (8-neighbour) set of equal values whose outer
/// neighbours are all strictly lower; it is reported at its first pixel in
/// row-major order. A plateau covering the whole map is not a maximum.
pub fn local_maxima(map: &Raster, floor: f64) -> Vec<(usize, usize, f64)> {
    let (w, h) = map.dims();
    let d = map.data();
    let mut seen = vec![false; w * h];
    let mut found = Vec::new();
    let mut queue = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = d[i];
            if seen[i] || !(v > floor) {
                continue;
            }
            let mut plateau = false;
            let mut higher = false;
            for_neighbours(x, y, w, h, |j| {
                if d[j] > v {
                    higher = true;
                } else if d[j] == v {
                    plateau = true;
                }
            });
            if higher {
                continue;
            }
            if !plateau {
                found.push((x, y, v));
                continue;
            }
            // flood the plateau; it is a maximum only if nothing around it is higher
            let mut is_max = true;
            let mut size = 0usize;
            seen[i] = true;
            queue.clear();
            queue.push(i);
            while let Some(j) = queue.pop() {
                size += 1;
                for_neighbours(j % w, j / w, w, h, |k| {
                    if d[k] > v {
                        is_max = false;
                    } else if d[k] == v && !seen[k] {
                        seen[k] = true;
                        queue.push(k);
                    }
                });
            }
            if is_max && size < w * h {
                found.push((x, y, v));
            }
        }
    }
    found.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    found
}

fn for_neighbours(x: usize, y: usize, w: usize, h: usize, mut f: impl FnMut(usize)) {
    for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
        for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
            if nx != x || ny != y {
                f(ny * w + nx);
            }
        }
    }
}

/// Top `top_k` maxima of one score map.
pub fn detect_frame(map: &Raster, t: usize, top_k: usize, score_floor: f64) -> Vec<Detection> {
    local_maxima(map, score_floor)
        .into_iter()
        .take(top_k)
        .map(|(x, y, score)| Detection { x, y, t, score })
        .collect()
}

/// Detections for every score map; `times[i]` labels `maps[i]`.
pub fn detect(maps: &[Raster], times: &[usize], top_k: usize, score_floor: f64) -> Result<Vec<Detection>> {
    if top_k == 0 {
        return Err(Error::invalid("top_k must be at least 1"));
    }
    if maps.len() != times.len() {
        return Err(Error::invalid("one time label per score map"));
    }
    Ok(maps.iter().zip(times).flat_map(|(m, &t)| detect_frame(m, t, top_k, score_floor)).collect())
}
