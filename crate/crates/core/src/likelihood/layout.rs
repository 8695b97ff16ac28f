use std::collections::BTreeMap;

use super::model::{normal_prior_logpdf, LikelihoodWorkspace, PRIOR_VARIANCE};
use crate::domain::{
    Area, GammaTerm, Gender, ModelParams, PosteriorDraws, RunMeta, Stratum, StudyYear, SurvivalCoefficients, N_GAMMA,
};
use crate::error::{Error, Result};
use crate::mcmc::{Block, BlockTarget};

/// Maps the sampler's flat vector to model parameters.
///
/// Layout: `[ln a, free gammas…, (alpha0, alpha1) per stratum…]`. Survival
/// coefficients whose indicator never fires in the data are held at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    gammas: Vec<usize>,
    strata: Vec<Stratum>,
}

fn alpha_name(prefix: &str, s: Stratum) -> String {
    format!("{prefix}_{}_{}_{}", s.area.code(), s.year.year(), s.gender.as_str())
}

fn parse_alpha_name(name: &str) -> Option<(bool, Stratum)> {
    let mut parts = name.split('_');
    let slope = match parts.next()? {
        "alpha0" => false,
        "alpha1" => true,
        _ => return None,
    };
    let area = Area::from_code(parts.next()?.parse().ok()?)?;
    let year = StudyYear::from_year(parts.next()?.parse().ok()?)?;
    let gender = Gender::parse(parts.next()?)?;
    if parts.next().is_some() {
        return None;
    }
    Some((slope, Stratum::new(area, year, gender)))
}

impl ParamLayout {
    pub fn new(free_gamma: [bool; N_GAMMA], strata: Vec<Stratum>) -> Self {
        ParamLayout {
            gammas: (0..N_GAMMA).filter(|&k| free_gamma[k]).collect(),
            strata,
        }
    }

    pub fn for_workspace(ws: &LikelihoodWorkspace) -> Self {
        ParamLayout::new(ws.active_gamma(), ws.strata().collect())
    }

    pub fn dim(&self) -> usize {
        1 + self.gammas.len() + 2 * self.strata.len()
    }

    pub fn free_gammas(&self) -> &[usize] {
        &self.gammas
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    fn alpha_offset(&self, k: usize) -> usize {
        1 + self.gammas.len() + 2 * k
    }

    pub fn to_params(&self, x: &[f64]) -> ModelParams {
        let mut gamma = SurvivalCoefficients::default();
        for (k, &g) in self.gammas.iter().enumerate() {
            gamma.0[g] = x[1 + k];
        }
        let mut p = ModelParams {
            shape_a: x[0].exp(),
            gamma,
            alpha0: BTreeMap::new(),
            alpha1: BTreeMap::new(),
        };
        for (k, &s) in self.strata.iter().enumerate() {
            let o = self.alpha_offset(k);
            p.set_alpha(s, x[o], x[o + 1]);
        }
        p
    }

    pub fn from_params(&self, p: &ModelParams) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.dim());
        x.push(p.shape_a.ln());
        x.extend(self.gammas.iter().map(|&g| p.gamma.0[g]));
        for &s in &self.strata {
            let (a0, a1) = p.alpha(s)?;
            x.push(a0);
            x.push(a1);
        }
        Ok(x)
    }

    /// `a`, gamma labels, then `alpha0_<area>_<year>_<gender>` / `alpha1_…` per stratum.
    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["a".to_string()];
        names.extend(self.gammas.iter().map(|&g| GammaTerm::from_index(g).unwrap().name()));
        for &s in &self.strata {
            names.push(alpha_name("alpha0", s));
            names.push(alpha_name("alpha1", s));
        }
        names
    }

    /// Stored draw: the sampler vector with `ln a` replaced by `a`.
    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        out[0] = x[0].exp();
        out
    }

    /// Start point: every coefficient zero and `a = 1`.
    pub fn zero_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

/// Rebuilds parameters from labelled values as written by [`ParamLayout::names`].
/// Survival coefficients not listed are zero.
pub fn params_from_named(names: &[String], values: &[f64]) -> Result<ModelParams> {
    let mut p = ModelParams {
        shape_a: f64::NAN,
        gamma: SurvivalCoefficients::default(),
        alpha0: BTreeMap::new(),
        alpha1: BTreeMap::new(),
    };
    for (name, &v) in names.iter().zip(values) {
        if name == "a" {
            p.shape_a = v;
        } else if let Some(t) = GammaTerm::from_name(name) {
            p.gamma.set(t, v);
        } else if let Some((slope, s)) = parse_alpha_name(name) {
            if slope {
                p.alpha1.insert(s, v);
            } else {
                p.alpha0.insert(s, v);
            }
        } else {
            return Err(Error::Schema(format!("unknown parameter {name:?}")));
        }
    }
    if !(p.shape_a > 0.0) {
        return Err(Error::Schema("draw has no positive shape parameter a".into()));
    }
    if p.alpha0.keys().ne(p.alpha1.keys()) {
        return Err(Error::Schema("alpha0 and alpha1 columns cover different strata".into()));
    }
    Ok(p)
}

/// Sampling target over a participant workspace. Block 0 holds `ln a` and the
/// free survival coefficients; each stratum's smoking pair is its own block.
#[derive(Debug, Clone)]
pub struct ModelTarget<'a> {
    pub workspace: &'a LikelihoodWorkspace,
    pub layout: ParamLayout,
}

impl<'a> ModelTarget<'a> {
    pub fn new(workspace: &'a LikelihoodWorkspace) -> Self {
        ModelTarget {
            workspace,
            layout: ParamLayout::for_workspace(workspace),
        }
    }

    /// Start for mode finding: `a = 4` with the crude rate as intercept, all else zero.
    pub fn crude_start(&self) -> Vec<f64> {
        let a = 4.0;
        let mut x = self.layout.zero_point();
        x[0] = f64::ln(a);
        x[1] = self.workspace.crude_log_rate(a);
        x
    }

    fn survival_params(&self, x: &[f64]) -> (f64, SurvivalCoefficients) {
        let mut gamma = SurvivalCoefficients::default();
        for (k, &g) in self.layout.gammas.iter().enumerate() {
            gamma.0[g] = x[1 + k];
        }
        (x[0].exp(), gamma)
    }
}

impl BlockTarget for ModelTarget<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn blocks(&self) -> Vec<Block> {
        let mut blocks = vec![Block {
            name: "survival".into(),
            indices: (0..1 + self.layout.gammas.len()).collect(),
        }];
        for (k, s) in self.layout.strata.iter().enumerate() {
            let o = self.layout.alpha_offset(k);
            blocks.push(Block {
                name: format!("smoking {s}"),
                indices: vec![o, o + 1],
            });
        }
        blocks
    }

    fn block_log_density(&self, block: usize, x: &[f64]) -> f64 {
        if block == 0 {
            let (a, gamma) = self.survival_params(x);
            let prior: f64 = (0..1 + self.layout.gammas.len()).map(|i| normal_prior_logpdf(x[i])).sum();
            let ll = self.workspace.survival_loglik(a, &gamma);
            if ll.is_nan() {
                return f64::NEG_INFINITY;
            }
            prior + ll
        } else {
            let k = block - 1;
            let o = self.layout.alpha_offset(k);
            let (a0, a1) = (x[o], x[o + 1]);
            normal_prior_logpdf(a0) + normal_prior_logpdf(a1) + self.workspace.smoking_loglik(self.layout.strata[k], a0, a1)
        }
    }

    fn block_gradient(&self, block: usize, x: &[f64]) -> Option<Vec<f64>> {
        if block == 0 {
            let (a, gamma) = self.survival_params(x);
            let e = self.workspace.survival_eval(a, &gamma);
            let mut g = Vec::with_capacity(1 + self.layout.gammas.len());
            g.push(e.d_ln_a - x[0] / PRIOR_VARIANCE);
            for (k, &gi) in self.layout.gammas.iter().enumerate() {
                g.push(e.d_gamma[gi] - x[1 + k] / PRIOR_VARIANCE);
            }
            Some(g)
        } else {
            let k = block - 1;
            let o = self.layout.alpha_offset(k);
            let d = self.workspace.smoking_gradient(self.layout.strata[k], x[o], x[o + 1]);
            Some(vec![d[0] - x[o] / PRIOR_VARIANCE, d[1] - x[o + 1] / PRIOR_VARIANCE])
        }
    }

    fn output_names(&self) -> Vec<String> {
        self.layout.names()
    }

    fn output(&self, x: &[f64]) -> Vec<f64> {
        self.layout.output(x)
    }
}

/// A single-chain draw set holding the given parameter vectors, labelled like
/// sampler output (every survival coefficient included).
pub fn draws_from_params(params: &[ModelParams]) -> Result<PosteriorDraws> {
    let first = params
        .first()
        .ok_or_else(|| Error::Precondition("no parameter sets given".into()))?;
    let layout = ParamLayout::new([true; N_GAMMA], first.strata().collect());
    let mut values = Vec::with_capacity(params.len() * layout.dim());
    for p in params {
        values.extend(layout.output(&layout.from_params(p)?));
    }
    let meta = RunMeta {
        n_chains: 1,
        iterations: params.len(),
        burn_in: 0,
        thinning: 1,
        seed: 0,
    };
    PosteriorDraws::new(layout.names(), values, vec![0; params.len()], meta)
}
