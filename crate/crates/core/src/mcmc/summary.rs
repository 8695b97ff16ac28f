use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::PosteriorDraws;
use crate::stats::{mean, quantile_sorted, variance};

/// Posterior mean, standard deviation (n - 1 denominator) and 2.5% / 97.5%
/// quantiles (linear interpolation between order statistics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

pub fn posterior_summary(draws: &PosteriorDraws) -> Vec<SummaryRow> {
    draws
        .parameter_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut col = draws.column(j);
            let mu = mean(&col);
            let sd = variance(&col).sqrt();
            col.sort_by(f64::total_cmp);
            SummaryRow {
                parameter: name.clone(),
                mean: mu,
                sd,
                q025: quantile_sorted(&col, 0.025),
                q975: quantile_sorted(&col, 0.975),
            }
        })
        .collect()
}

/// `Parameter,Mean,SD,2.5%,97.5%` rows.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["Parameter", "Mean", "SD", "2.5%", "97.5%"])?;
    for r in rows {
        w.write_record([
            r.parameter.clone(),
            format!("{:.3}", r.mean),
            format!("{:.3}", r.sd),
            format!("{:.3}", r.q025),
            format!("{:.3}", r.q975),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RunMeta;

    fn draws(values: Vec<f64>) -> PosteriorDraws {
        let n = values.len();
        PosteriorDraws::new(
            vec!["x".into()],
            values,
            vec![0; n],
            RunMeta {
                n_chains: 1,
                iterations: n,
                burn_in: 0,
                thinning: 1,
                seed: 0,
            },
        )
        .unwrap()
    }

    #[test]
    fn constant_draws() {
        let s = &posterior_summary(&draws(vec![2.5; 40]))[0];
        assert_eq!((s.mean, s.sd, s.q025, s.q975), (2.5, 0.0, 2.5, 2.5));
    }

    #[test]
    fn one_to_hundred_against_order_statistics() {
        // reversed input so sorting is exercised
        let s = &posterior_summary(&draws((1..=100).rev().map(f64::from).collect()))[0];
        // brute force: position (n-1)p between the 3rd and 4th order statistics
        let order: Vec<f64> = (1..=100).map(f64::from).collect();
        let h = 99.0 * 0.025;
        let lo = h as usize;
        let expect = order[lo] + (h - lo as f64) * (order[lo + 1] - order[lo]);
        assert!((s.q025 - expect).abs() < 1e-12);
        assert!((s.mean - 50.5).abs() < 1e-12);
    }
}
