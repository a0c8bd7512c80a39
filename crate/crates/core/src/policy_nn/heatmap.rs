//! Policy heatmaps over `(t, P^ℓ - P^v)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::payoff_analytics::format_f64;

use super::PolicyNetwork;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub t: f64,
    pub difference: f64,
    pub vetf_value: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHeatmap {
    pub cells: Vec<HeatmapCell>,
}

impl PolicyHeatmap {
    /// Allocations at time `t`, in difference-grid order.
    pub fn column(&self, t: f64) -> Vec<&HeatmapCell> {
        self.cells.iter().filter(|c| c.t == t).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "difference", "P_v", "alpha"])?;
        for c in &self.cells {
            w.write_record([
                format_f64(c.t),
                format_f64(c.difference),
                format_f64(c.vetf_value),
                format_f64(c.alpha),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates the policy at `P^ℓ = P^v + d` for every `t` in `times` and `d`
/// in `differences`, with `P^v` pinned to `vetf_values[i]` at `times[i]`.
///
/// At `t = 0` both portfolios equal the initial wealth, so only `d = 0` with
/// `P^v = 1` is evaluated there. Points with `P^ℓ < 0` are skipped.
pub fn export_policy_heatmap(
    net: &PolicyNetwork,
    times: &[f64],
    differences: &[f64],
    vetf_values: &[f64],
) -> Result<PolicyHeatmap> {
    if times.len() != vetf_values.len() {
        return Err(Error::InvalidArgument(format!(
            "{} times but {} pinned VETF values",
            times.len(),
            vetf_values.len()
        )));
    }
    let mut cells = Vec::with_capacity(times.len() * differences.len());
    for (&t, &pv) in times.iter().zip(vetf_values) {
        if t == 0.0 {
            cells.push(HeatmapCell {
                t,
                difference: 0.0,
                vetf_value: 1.0,
                alpha: net.forward(0.0, 1.0, 1.0)?,
            });
            continue;
        }
        for &d in differences {
            let pl = pv + d;
            if pl < 0.0 {
                continue;
            }
            cells.push(HeatmapCell {
                t,
                difference: d,
                vetf_value: pv,
                alpha: net.forward(t, pl, pv)?,
            });
        }
    }
    Ok(PolicyHeatmap { cells })
}
