//! N-agent mean-field extension.
//!
//! Every agent carries its own environment trace `S_i`, fed by the agent's
//! deviation from the population mean with gain `2 beta`:
//!
//! ```text
//! S_i' = (1 - gamma) S_i + 2 beta (x_i - mean(x))
//! x_i' = (1 - eta alpha_i) x_i + eta G_i,    G_i = -2 beta S_i
//! ```
//!
//! Each deviation mode `(x_i - mean(x), S_i - mean(S))` then evolves under
//! `[[1, -2 eta beta], [2 beta, 1 - gamma]]`, whose determinant is
//! `(1 - gamma) + 4 eta beta^2`, so the stability boundary does not depend
//! on N. With `S = (S, -S)` at N = 2 the map is the pair model.
//!
//! The deviation is evaluated as `(N - 1)/N * (x_i - mean of the others)`,
//! with the leave-one-out sums built from chunked prefix and suffix scans.
//! At N = 2 this makes every floating-point operation coincide with the pair
//! map, and for any N the result is independent of the thread count.

use rayon::prelude::*;

use crate::error::Result;
use crate::params::ModelParams;
use crate::state::PopulationState;

const CHUNK: usize = 4096;

/// Reusable buffers for [`meanfield_step_in_place`].
#[derive(Debug, Default, Clone)]
pub struct MeanFieldWorkspace {
    loo: Vec<f64>,
}

pub fn meanfield_step(state: &PopulationState, p: &ModelParams) -> Result<PopulationState> {
    let mut next = state.clone();
    meanfield_step_in_place(&mut next, p, &mut MeanFieldWorkspace::default())?;
    Ok(next)
}

pub fn meanfield_step_in_place(
    state: &mut PopulationState,
    p: &ModelParams,
    ws: &mut MeanFieldWorkspace,
) -> Result<()> {
    state.check_finite()?;
    let n = state.len();
    leave_one_out_sums(state.x(), &mut ws.loo);

    let others = (n - 1) as f64;
    let gain = 2.0 * p.beta() * (others / n as f64);
    let two_beta = 2.0 * p.beta();
    let decay = 1.0 - p.gamma();
    let eta = p.eta();
    let loo = &ws.loo;

    let (x, s) = state.parts_mut();
    x.par_chunks_mut(CHUNK)
        .zip(s.par_chunks_mut(CHUNK))
        .zip(loo.par_chunks(CHUNK))
        .enumerate()
        .for_each(|(c, ((xc, sc), lc))| {
            for k in 0..xc.len() {
                let (xi, si) = (xc[k], sc[k]);
                let g = -(two_beta * si);
                sc[k] = decay * si + gain * (xi - lc[k] / others);
                xc[k] = (1.0 - eta * p.damping(c * CHUNK + k)) * xi + eta * g;
            }
        });
    Ok(())
}

/// `out[i] = sum_{j != i} x[j]`, combined in a fixed order.
fn leave_one_out_sums(x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.resize(x.len(), 0.0);
    let chunk_sums: Vec<f64> = x.par_chunks(CHUNK).map(|c| c.iter().sum()).collect();

    let mut before = Vec::with_capacity(chunk_sums.len());
    let mut acc = 0.0;
    for &c in &chunk_sums {
        before.push(acc);
        acc += c;
    }
    let mut after = vec![0.0; chunk_sums.len()];
    acc = 0.0;
    for (slot, &c) in after.iter_mut().zip(&chunk_sums).rev() {
        *slot = acc;
        acc += c;
    }

    out.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .enumerate()
        .for_each(|(c, (oc, xc))| {
            let mut suffix = 0.0;
            for k in (0..xc.len()).rev() {
                oc[k] = suffix;
                suffix += xc[k];
            }
            let mut prefix = 0.0;
            for k in 0..xc.len() {
                oc[k] = (before[c] + prefix) + (oc[k] + after[c]);
                prefix += xc[k];
            }
        });
}
