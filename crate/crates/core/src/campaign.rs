//! Disorder-realization campaigns: configuration, deterministic phase
//! sampling, the per-realization pipeline, ordered averaging and CSV output.
//!
//! Realizations run in parallel, but all averages are accumulated in
//! realization-index order, so output is bit-identical for any worker count.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::basis::{crowding, FockBasis, FockState, DEFAULT_DIMENSION_CAP};
use crate::dynamics::{
    diagonal_ensemble_distributions_all, expand_initial, fock_participation_ratios, near_degenerate_gaps,
    snapshot_distributions_all, EquilibriumMethod, DEFAULT_EQUILIBRIUM_TIME,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, default_interaction, ModelParams, DEFAULT_BETA, DEFAULT_DISORDER, DEFAULT_HOPPING};
use crate::observables::{
    average_sweeps, distribution_from_weights, eigenstate_sweep, entropy_site, n_site, windowed_dispersion, Dispersion,
    EigenstateSweep, Matching, SiteDistribution,
};
use crate::parallel;
use crate::spectral::{diagonalize, eigenvalues_dense, gap_ratios, windowed_r_average, RWindow};
use crate::thermalization::{
    classify_lenient, microcanonical_at, microcanonical_curve, trace_distance, MicrocanonicalCurve, ThermalizationVerdict, DEFAULT_HALF_WIDTH, DEFAULT_TD_THRESHOLD,
};

/// Which occupation states are quenched in a thermalization campaign.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum InitialStates {
    /// Every state of the occupation basis.
    #[default]
    All,
    /// Only the unit-filling state `|1,1,...,1>`.
    Mott,
    List(Vec<FockState>),
}

impl InitialStates {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(Self::All),
            "mott" => Ok(Self::Mott),
            other => other
                .split(';')
                .filter(|t| !t.trim().is_empty())
                .map(FockState::parse)
                .collect::<Result<Vec<_>>>()
                .map(Self::List)
                .map_err(|e| Error::Config(format!("initial_states: {e}"))),
        }
    }

    fn resolve(&self, basis: &FockBasis) -> Result<Vec<usize>> {
        match self {
            Self::All => Ok((0..basis.len()).collect()),
            Self::Mott => Ok(vec![basis.index_of_state(&FockState::mott(basis.sites()))?]),
            Self::List(v) => v
                .iter()
                .map(|s| basis.index_of_state(s).map_err(|e| Error::Config(format!("initial state {s}: {e}"))))
                .collect(),
        }
    }
}

impl std::fmt::Display for InitialStates {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::All => f.write_str("all"),
            Self::Mott => f.write_str("mott"),
            Self::List(v) => {
                let parts: Vec<String> = v.iter().map(|s| s.to_string()).collect();
                f.write_str(&parts.join(";"))
            }
        }
    }
}

impl Serialize for InitialStates {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for InitialStates {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        InitialStates::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Interaction `U`: an explicit value or `"auto"` for `4/(N-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Interaction {
    #[default]
    Auto,
    Value(f64),
}

impl Interaction {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Self::Auto),
            v => v.parse().map(Self::Value).map_err(|_| Error::Config(format!("interaction: bad value {v:?}"))),
        }
    }

    pub fn resolve(self, particles: usize) -> Result<f64> {
        match self {
            Self::Auto => default_interaction(particles),
            Self::Value(u) => Ok(u),
        }
    }
}

impl Serialize for Interaction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Value(u) => s.serialize_f64(*u),
        }
    }
}

impl<'de> Deserialize<'de> for Interaction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(u) => Ok(Self::Value(u)),
            Raw::Int(u) => Ok(Self::Value(u as f64)),
            Raw::Str(s) => Interaction::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Primary equilibrium estimator reported in the equilibrium and verdict files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumChoice {
    #[default]
    Snapshot,
    DiagonalEnsemble,
}

/// Every knob of a campaign. Loaded from a flat TOML file; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub particles: usize,
    pub sites: usize,
    pub hopping: f64,
    pub interaction: Interaction,
    pub disorder: f64,
    pub beta: f64,
    pub realizations: usize,
    pub master_seed: u64,
    pub t_eq: f64,
    pub r_window: usize,
    pub r_stride: usize,
    pub dispersion_window: usize,
    pub dispersion_stride: usize,
    pub micro_half_width: usize,
    pub td_threshold: f64,
    pub matching: Matching,
    pub equilibrium: EquilibriumChoice,
    pub initial_states: InitialStates,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses the ambient pool.
    pub workers: usize,
    pub dimension_cap: usize,
    pub memory_budget_mb: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            particles: 7,
            sites: 7,
            hopping: DEFAULT_HOPPING,
            interaction: Interaction::Auto,
            disorder: DEFAULT_DISORDER,
            beta: DEFAULT_BETA,
            realizations: 40,
            master_seed: 20_240_917,
            t_eq: DEFAULT_EQUILIBRIUM_TIME,
            r_window: 200,
            r_stride: 200,
            dispersion_window: 200,
            dispersion_stride: 1,
            micro_half_width: DEFAULT_HALF_WIDTH,
            td_threshold: DEFAULT_TD_THRESHOLD,
            matching: Matching::Rank,
            equilibrium: EquilibriumChoice::Snapshot,
            initial_states: InitialStates::All,
            output_dir: PathBuf::from("out"),
            workers: 0,
            dimension_cap: DEFAULT_DIMENSION_CAP,
            memory_budget_mb: 4096,
        }
    }
}

impl CampaignConfig {
    /// Default configuration for `N` bosons on `N` sites.
    pub fn unit_filling(n: usize) -> Self {
        Self { particles: n, sites: n, ..Self::default() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_table(load_table(path)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Model parameters of realization with phase `phase`.
    pub fn model(&self, phase: f64) -> Result<ModelParams> {
        let p = ModelParams {
            particles: self.particles,
            sites: self.sites,
            hopping: self.hopping,
            interaction: self.interaction.resolve(self.particles)?,
            disorder: self.disorder,
            beta: self.beta,
            phase,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.realizations == 0 {
            return bad("realizations must be >= 1".into());
        }
        if self.r_window < 10 || self.dispersion_window < 2 || self.r_stride == 0 || self.dispersion_stride == 0 {
            return bad("windows must be >= 2 (r window >= 10) and strides >= 1".into());
        }
        if !(self.td_threshold > 0.0) {
            return bad("td_threshold must be positive".into());
        }
        if self.master_seed > i64::MAX as u64 {
            return bad("master_seed must be below 2^63".into());
        }
        if !self.t_eq.is_finite() {
            return bad("t_eq must be finite".into());
        }
        self.model(0.0).map_err(|e| Error::Config(e.to_string()))?;
        let dim = crate::basis::dimension(self.particles, self.sites)?;
        if dim > self.dimension_cap {
            return Err(Error::DimensionCap { dim, cap: self.dimension_cap });
        }
        Ok(())
    }

    /// Peak bytes for one realization, in units of `Dim^2` doubles.
    fn memory_factor(stage: Stage, all_states: bool) -> usize {
        match stage {
            Stage::Spectrum => 3,
            Stage::Eth => 5,
            Stage::Thermalize if all_states => 8,
            Stage::Thermalize => 5,
        }
    }

    /// Rejects runs whose estimated footprint exceeds `memory_budget_mb`.
    pub fn check_memory(&self, stage: Stage) -> Result<()> {
        let dim = crate::basis::dimension(self.particles, self.sites)?;
        let workers = if self.workers == 0 { parallel::current_workers() } else { self.workers };
        let concurrent = workers.min(self.realizations).max(1);
        let factor = Self::memory_factor(stage, self.initial_states == InitialStates::All);
        let bytes = (dim as u128) * (dim as u128) * 8 * factor as u128 * concurrent as u128;
        let needed_mb = (bytes / (1 << 20)) as usize;
        if needed_mb > self.memory_budget_mb {
            return Err(Error::MemoryBudget { needed_mb, budget_mb: self.memory_budget_mb });
        }
        Ok(())
    }

    /// Seed for the phase streams of this `(N, M)`; sizes get independent streams.
    pub fn phase_seed(&self) -> u64 {
        let mut z = self.master_seed ^ ((self.particles as u64) << 32 | self.sites as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        // splitmix64 finalizer
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Reads a config file into a table; see [`parse_table`].
pub fn load_table(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_table(&text)
}

/// Parses TOML, or failing that plain `key = value` lines where values that
/// are not valid TOML are taken as strings. `#` starts a comment.
pub fn parse_table(text: &str) -> Result<toml::Table> {
    if let Ok(t) = text.parse::<toml::Table>() {
        return Ok(t);
    }
    let mut table = toml::Table::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        table.insert(k.trim().to_string(), parse_value(v.trim()));
    }
    Ok(table)
}

/// A single config value: TOML if it parses, otherwise a bare string.
pub fn parse_value(v: &str) -> toml::Value {
    format!("x = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| toml::Value::String(v.trim_matches('"').to_string()))
}

/// Phases `phi_k` uniform in `[0, 2 pi)`. Realization `k` draws from its own
/// ChaCha stream `k`, so any subset can be regenerated in isolation.
pub fn sample_phases(master_seed: u64, realizations: usize) -> Vec<f64> {
    (0..realizations).map(|k| phase_for(master_seed, k)).collect()
}

pub fn phase_for(master_seed: u64, k: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(k as u64);
    rng.gen_range(0.0..TAU)
}

/// How far the per-realization pipeline goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    /// Eigenvalues only.
    Spectrum,
    /// Eigenvectors and the eigenstate sweep.
    Eth,
    /// Everything, including quenches of the selected occupation states.
    Thermalize,
}

/// Quench results of one realization for the selected initial states.
#[derive(Debug, Clone)]
pub struct QuenchBatch {
    pub states: Vec<usize>,
    pub mean_energy: Vec<f64>,
    pub pr: Vec<f64>,
    pub snapshot: Vec<SiteDistribution>,
    pub diagonal: Vec<SiteDistribution>,
}

#[derive(Debug, Clone)]
pub struct RealizationOutput {
    pub index: usize,
    pub phase: f64,
    pub eigenvalues: Vec<f64>,
    pub sweep: Option<EigenstateSweep>,
    pub quench: Option<QuenchBatch>,
    pub near_degenerate_gaps: usize,
}

/// Runs one realization up to `stage`.
pub fn run_realization(
    config: &CampaignConfig,
    basis: &FockBasis,
    states: &[usize],
    index: usize,
    phase: f64,
    stage: Stage,
) -> Result<RealizationOutput> {
    let params = config.model(phase)?;
    let h = build_hamiltonian(&params, basis)?;
    if stage == Stage::Spectrum {
        let eigenvalues = eigenvalues_dense(h.to_dense().as_ref())?;
        return Ok(RealizationOutput { index, phase, eigenvalues, sweep: None, quench: None, near_degenerate_gaps: 0 });
    }
    let spectral = diagonalize(&h)?;
    let sweep = eigenstate_sweep(&spectral, basis)?;
    let degenerate = near_degenerate_gaps(&spectral);
    if degenerate > 0 {
        log::warn!("realization {index}: {degenerate} near-degenerate level pairs");
    }

    let quench = if stage == Stage::Thermalize {
        let pr_all = fock_participation_ratios(&spectral);
        let (snapshot, diagonal) = if states.len() == basis.len() {
            (
                snapshot_distributions_all(&spectral, basis, config.t_eq),
                diagonal_ensemble_distributions_all(&spectral, &sweep),
            )
        } else {
            let column = basis.site_column(0);
            let per_state: Vec<(SiteDistribution, SiteDistribution)> = states
                .iter()
                .map(|&k| {
                    let q = expand_initial(&basis.state(k), basis, &spectral)?;
                    let snap = q.site_distribution_at(config.t_eq, &column, basis.particles());
                    let de = SiteDistribution::mix(
                        q.coefficients.iter().zip(&sweep.records).map(|(c, r)| (c * c, &r.distribution)),
                    );
                    Ok((snap, de))
                })
                .collect::<Result<_>>()?;
            per_state.into_iter().unzip()
        };
        Some(QuenchBatch {
            states: states.to_vec(),
            mean_energy: states.iter().map(|&k| h.diagonal()[k]).collect(),
            pr: states.iter().map(|&k| pr_all[k]).collect(),
            snapshot,
            diagonal,
        })
    } else {
        None
    };

    Ok(RealizationOutput {
        index,
        phase,
        eigenvalues: spectral.eigenvalues.clone(),
        sweep: Some(sweep),
        quench,
        near_degenerate_gaps: degenerate,
    })
}

/// One realization-averaged point of the gap-ratio curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RCurvePoint {
    pub window_index: usize,
    pub energy_per_particle: f64,
    pub r_mean: f64,
    /// Standard error over realizations (0 for a single realization).
    pub r_stderr: f64,
    pub realizations: usize,
}

/// Per-realization spectrum summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationSummary {
    pub index: usize,
    pub phase: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub r_mean: f64,
    pub near_degenerate_gaps: usize,
}

/// Equilibrium values of one initial state, averaged over realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedEquilibrium {
    pub state_id: usize,
    pub state: FockState,
    pub crowding: f64,
    pub mean_energy: f64,
    pub pr: f64,
    pub pr_over_dim: f64,
    /// Mean equilibrium distribution of the configured estimator.
    pub distribution: SiteDistribution,
    pub n1: f64,
    /// Mean of per-realization entropies.
    pub s1: f64,
    /// Entropy of the mean distribution.
    pub s1_of_mean: f64,
    /// Diagonal-ensemble cross-check: mean distribution and mean entropy.
    pub diagonal_ensemble: SiteDistribution,
    pub s1_diagonal_ensemble: f64,
    /// TD of the diagonal-ensemble distribution against the microcanonical point.
    pub td_diagonal_ensemble: f64,
    /// Microcanonical point matched by mean energy: mean entropy and entropy of the mean.
    pub s1_micro: f64,
    pub s1_micro_of_mean: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub stage: Stage,
    pub phases: Vec<f64>,
    pub realizations: Vec<RealizationSummary>,
    /// Eigenvalues of every realization, in realization order.
    pub spectra: Vec<Vec<f64>>,
    pub r_curve: Vec<RCurvePoint>,
    pub sweep: Option<EigenstateSweep>,
    /// The sweep averaged with the other matching rule.
    pub alternate_sweep: Option<(Matching, EigenstateSweep)>,
    pub n1_dispersion: Vec<Dispersion>,
    pub s1_dispersion: Vec<Dispersion>,
    pub microcanonical: Option<MicrocanonicalCurve>,
    pub equilibrium: Vec<AveragedEquilibrium>,
    pub verdicts: Vec<ThermalizationVerdict>,
}

impl CampaignResult {
    pub fn dim(&self) -> usize {
        self.spectra.first().map_or(0, |e| e.len())
    }

    /// Realization-averaged mean gap ratio over levels whose rank lies in the
    /// top `fraction` of the spectrum.
    pub fn tail_r_mean(&self, fraction: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .spectra
            .iter()
            .filter_map(|e| {
                let cut = ((1.0 - fraction) * e.len() as f64).floor() as usize;
                let g = gap_ratios(e).ok()?;
                let rs: Vec<f64> = g.ratios.iter().filter(|(n, _)| *n >= cut).map(|&(_, r)| r).collect();
                (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64)
            })
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Full pipeline for every realization: spectra, eigenstate sweeps, quench of
/// the selected occupation states, classification. Writes nothing.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    run(config, Stage::Thermalize)
}

/// Runs all realizations up to `stage` and averages them in index order.
///
/// If any realization fails, the successful ones are written to
/// `output_dir` together with an error manifest and the first error is returned.
pub fn run(config: &CampaignConfig, stage: Stage) -> Result<CampaignResult> {
    config.validate()?;
    config.check_memory(stage)?;
    let basis = FockBasis::with_cap(config.particles, config.sites, config.dimension_cap)?;
    let states = if stage == Stage::Thermalize { config.initial_states.resolve(&basis)? } else { Vec::new() };
    let phases = sample_phases(config.phase_seed(), config.realizations);

    let outputs: Vec<Result<RealizationOutput>> = parallel::with_workers(config.workers, || {
        parallel::map_indexed(phases.len(), |k| run_realization(config, &basis, &states, k, phases[k], stage))
    });

    if outputs.iter().any(|o| o.is_err()) {
        let mut ok = Vec::new();
        let mut failures = Vec::new();
        let mut first_err = None;
        for (k, o) in outputs.into_iter().enumerate() {
            match o {
                Ok(r) => ok.push(r),
                Err(e) => {
                    failures.push(format!("realization {k} (phase {}): {e}", phases[k]));
                    first_err.get_or_insert(e);
                }
            }
        }
        write_failure_manifest(config, &ok, &failures)?;
        return Err(first_err.expect("at least one failure"));
    }
    let outputs: Vec<RealizationOutput> = outputs.into_iter().map(|o| o.expect("checked")).collect();
    aggregate(config, stage, &basis, phases, outputs)
}

fn summarize(o: &RealizationOutput) -> RealizationSummary {
    RealizationSummary {
        index: o.index,
        phase: o.phase,
        e_min: o.eigenvalues.first().copied().unwrap_or(f64::NAN),
        e_max: o.eigenvalues.last().copied().unwrap_or(f64::NAN),
        r_mean: gap_ratios(&o.eigenvalues).ok().and_then(|g| g.mean()).unwrap_or(f64::NAN),
        near_degenerate_gaps: o.near_degenerate_gaps,
    }
}

fn average_r_curves(curves: &[Vec<RWindow>]) -> Vec<RCurvePoint> {
    let count = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    let k = curves.len();
    (0..count)
        .map(|w| {
            let e = curves.iter().map(|c| c[w].energy_per_particle).sum::<f64>() / k as f64;
            let rs: Vec<f64> = curves.iter().map(|c| c[w].r_mean).collect();
            let mean = rs.iter().sum::<f64>() / k as f64;
            let stderr = if k > 1 {
                let var = rs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (k - 1) as f64;
                (var / k as f64).sqrt()
            } else {
                0.0
            };
            RCurvePoint { window_index: w, energy_per_particle: e, r_mean: mean, r_stderr: stderr, realizations: k }
        })
        .collect()
}

fn aggregate(
    config: &CampaignConfig,
    stage: Stage,
    basis: &FockBasis,
    phases: Vec<f64>,
    outputs: Vec<RealizationOutput>,
) -> Result<CampaignResult> {
    let k = outputs.len();
    let inv = 1.0 / k as f64;
    let realizations: Vec<RealizationSummary> = outputs.iter().map(summarize).collect();

    let curves = outputs
        .iter()
        .map(|o| windowed_r_average(&o.eigenvalues, config.particles, config.r_window, config.r_stride))
        .collect::<Result<Vec<_>>>()?;
    let r_curve = average_r_curves(&curves);

    let mut result = CampaignResult {
        config: config.clone(),
        stage,
        phases,
        realizations,
        spectra: Vec::new(),
        r_curve,
        sweep: None,
        alternate_sweep: None,
        n1_dispersion: Vec::new(),
        s1_dispersion: Vec::new(),
        microcanonical: None,
        equilibrium: Vec::new(),
        verdicts: Vec::new(),
    };

    if stage >= Stage::Eth {
        let sweeps: Vec<EigenstateSweep> = outputs.iter().map(|o| o.sweep.clone().expect("sweep")).collect();
        let avg = average_sweeps(&sweeps, config.matching)?;
        let e = avg.energies_per_particle();
        result.n1_dispersion = windowed_dispersion(&avg.n1(), &e, config.dispersion_window, config.dispersion_stride)?;
        result.s1_dispersion = windowed_dispersion(&avg.s1(), &e, config.dispersion_window, config.dispersion_stride)?;
        result.microcanonical = Some(microcanonical_curve(&avg, config.micro_half_width, 1)?);
        result.sweep = Some(avg);
        let other = match config.matching {
            Matching::Rank => Matching::EnergyBin,
            Matching::EnergyBin => Matching::Rank,
        };
        result.alternate_sweep = Some((other, average_sweeps(&sweeps, other)?));
    }

    if stage == Stage::Thermalize {
        let batches: Vec<&QuenchBatch> = outputs.iter().map(|o| o.quench.as_ref().expect("quench")).collect();
        let states = &batches[0].states;
        let dim = basis.len() as f64;
        let mut equilibrium = Vec::with_capacity(states.len());
        for (j, &sid) in states.iter().enumerate() {
            let primary: Vec<&SiteDistribution> = batches
                .iter()
                .map(|b| match config.equilibrium {
                    EquilibriumChoice::Snapshot => &b.snapshot[j],
                    EquilibriumChoice::DiagonalEnsemble => &b.diagonal[j],
                })
                .collect();
            let distribution = SiteDistribution::mix(primary.iter().map(|d| (inv, *d)));
            let diagonal_ensemble = SiteDistribution::mix(batches.iter().map(|b| (inv, &b.diagonal[j])));
            let pr = batches.iter().map(|b| b.pr[j]).sum::<f64>() * inv;
            let state = basis.state(sid);
            equilibrium.push(AveragedEquilibrium {
                state_id: sid,
                crowding: crowding(state.occupations())?,
                state,
                mean_energy: batches.iter().map(|b| b.mean_energy[j]).sum::<f64>() * inv,
                pr,
                pr_over_dim: pr / dim,
                n1: primary.iter().map(|d| n_site(d)).sum::<f64>() * inv,
                s1: primary.iter().map(|d| entropy_site(d)).sum::<f64>() * inv,
                s1_of_mean: entropy_site(&distribution),
                distribution,
                s1_diagonal_ensemble: batches.iter().map(|b| entropy_site(&b.diagonal[j])).sum::<f64>() * inv,
                td_diagonal_ensemble: f64::NAN,
                s1_micro: f64::NAN,
                s1_micro_of_mean: f64::NAN,
                diagonal_ensemble,
                realizations: k,
            });
        }
        let curve = result.microcanonical.as_ref().expect("microcanonical curve");
        for eq in equilibrium.iter_mut() {
            let mc = microcanonical_at(curve, eq.mean_energy)?;
            eq.td_diagonal_ensemble = trace_distance(&eq.diagonal_ensemble, &mc.distribution)?;
            eq.s1_micro = mc.s1;
            eq.s1_micro_of_mean = mc.s1_of_mean;
        }
        result.verdicts = equilibrium
            .iter()
            .map(|eq| {
                let rec = crate::dynamics::EquilibriumRecord {
                    state: Some(eq.state.clone()),
                    mean_energy: eq.mean_energy,
                    pr: eq.pr,
                    distribution: eq.distribution.clone(),
                    n1: eq.n1,
                    s1: eq.s1,
                    method: match config.equilibrium {
                        EquilibriumChoice::Snapshot => EquilibriumMethod::Snapshot { t: config.t_eq },
                        EquilibriumChoice::DiagonalEnsemble => EquilibriumMethod::DiagonalEnsemble,
                    },
                };
                classify_lenient(&rec, curve, config.td_threshold)
            })
            .collect::<Result<_>>()?;
        result.equilibrium = equilibrium;
    }

    result.spectra = outputs.into_iter().map(|o| o.eigenvalues).collect();
    Ok(result)
}

/// Realization-averaged site-1 trajectory of one initial state.
#[derive(Debug, Clone)]
pub struct QuenchTrajectory {
    pub state: FockState,
    pub times: Vec<f64>,
    pub distributions: Vec<SiteDistribution>,
    pub n1: Vec<f64>,
    /// Mean over realizations of `S1(t)`.
    pub s1: Vec<f64>,
    /// `S1(t)` per realization.
    pub s1_per_realization: Vec<Vec<f64>>,
}

/// Evolves `state` in every realization and averages site-1 observables.
pub fn run_quench(config: &CampaignConfig, state: &FockState, times: &[f64]) -> Result<QuenchTrajectory> {
    config.validate()?;
    config.check_memory(Stage::Eth)?;
    let basis = FockBasis::with_cap(config.particles, config.sites, config.dimension_cap)?;
    basis.index_of_state(state).map_err(|e| Error::Config(format!("initial state {state}: {e}")))?;
    let phases = sample_phases(config.phase_seed(), config.realizations);
    let column = basis.site_column(0);

    let per: Vec<Result<Vec<SiteDistribution>>> = parallel::with_workers(config.workers, || {
        parallel::map_indexed(phases.len(), |k| {
            let params = config.model(phases[k])?;
            let spectral = diagonalize(&build_hamiltonian(&params, &basis)?)?;
            let q = expand_initial(state, &basis, &spectral)?;
            Ok(times
                .iter()
                .map(|&t| distribution_from_weights(&q.evolve(t).weights(), &column, basis.particles()))
                .collect())
        })
    });
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let inv = 1.0 / per.len() as f64;
    let distributions: Vec<SiteDistribution> =
        (0..times.len()).map(|t| SiteDistribution::mix(per.iter().map(|r| (inv, &r[t])))).collect();
    let s1_per_realization: Vec<Vec<f64>> = per.iter().map(|r| r.iter().map(entropy_site).collect()).collect();
    let s1 = (0..times.len()).map(|t| s1_per_realization.iter().map(|r| r[t]).sum::<f64>() * inv).collect();
    Ok(QuenchTrajectory {
        state: state.clone(),
        times: times.to_vec(),
        n1: distributions.iter().map(n_site).collect(),
        distributions,
        s1,
        s1_per_realization,
    })
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// Shortest round-trip form; scientific notation for very small or large magnitudes.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn p_headers(particles: usize) -> Vec<String> {
    (0..=particles).map(|i| format!("P{i}")).collect()
}

struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvOut {
    fn create(dir: &Path, name: &str, header: &[String]) -> Result<Self> {
        let path = dir.join(name);
        let writer = csv::Writer::from_path(&path).map_err(|source| Error::Csv { path: path.clone(), source })?;
        let mut out = Self { path, writer };
        out.row(header)?;
        Ok(out)
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(|source| Error::Csv { path: self.path.clone(), source })
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Writes every CSV the result supports plus `manifest.toml`; returns the paths.
pub fn emit_outputs(result: &CampaignResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = result.config.particles;
    let mut written = Vec::new();

    let mut w = CsvOut::create(dir, "r_curve.csv", &strings(&["E_per_N", "r_mean", "r_stderr", "window_index"]))?;
    for p in &result.r_curve {
        w.row(&[fmt(p.energy_per_particle), fmt(p.r_mean), fmt(p.r_stderr), p.window_index.to_string()])?;
    }
    written.push(w.finish()?);

    let mut w = CsvOut::create(
        dir,
        "realizations.csv",
        &strings(&["realization", "phi", "E_min", "E_max", "r_mean", "near_degenerate_gaps"]),
    )?;
    for r in &result.realizations {
        w.row(&[
            r.index.to_string(),
            fmt(r.phase),
            fmt(r.e_min),
            fmt(r.e_max),
            fmt(r.r_mean),
            r.near_degenerate_gaps.to_string(),
        ])?;
    }
    written.push(w.finish()?);

    if let Some(sweep) = &result.sweep {
        let mut header = strings(&["eig_index", "E_per_N"]);
        header.extend(p_headers(n));
        header.extend(strings(&["n1", "S1", "PR"]));
        let mut w = CsvOut::create(dir, "eigenstates.csv", &header)?;
        for (m, r) in sweep.records.iter().enumerate() {
            let mut row = vec![m.to_string(), fmt(r.energy / n as f64)];
            row.extend(r.distribution.probabilities.iter().map(|&p| fmt(p)));
            row.extend([fmt(r.n1), fmt(r.s1), fmt(r.pr)]);
            w.row(&row)?;
        }
        written.push(w.finish()?);

        if let Some((matching, alt)) = &result.alternate_sweep {
            let name = match matching {
                Matching::Rank => "eigenstates_rank.csv",
                Matching::EnergyBin => "eigenstates_energy_bin.csv",
            };
            let mut w = CsvOut::create(dir, name, &header)?;
            for (m, r) in alt.records.iter().enumerate() {
                let mut row = vec![m.to_string(), fmt(r.energy / n as f64)];
                row.extend(r.distribution.probabilities.iter().map(|&p| fmt(p)));
                row.extend([fmt(r.n1), fmt(r.s1), fmt(r.pr)]);
                w.row(&row)?;
            }
            written.push(w.finish()?);
        }

        let mut w = CsvOut::create(
            dir,
            "dispersion.csv",
            &strings(&["window_start", "E_per_N", "n1_std", "n1_range", "S1_std", "S1_range"]),
        )?;
        for (a, b) in result.n1_dispersion.iter().zip(&result.s1_dispersion) {
            w.row(&[a.start.to_string(), fmt(a.energy_per_particle), fmt(a.std), fmt(a.range), fmt(b.std), fmt(b.range)])?;
        }
        written.push(w.finish()?);
    }

    if let Some(curve) = &result.microcanonical {
        let mut header = strings(&["center_index", "E"]);
        header.extend(p_headers(n));
        header.extend(strings(&["n1_mc", "S1_mc"]));
        let mut w = CsvOut::create(dir, "microcanonical.csv", &header)?;
        for p in &curve.points {
            let mut row = vec![p.center.to_string(), fmt(p.energy)];
            row.extend(p.distribution.probabilities.iter().map(|&x| fmt(x)));
            row.extend([fmt(p.n1), fmt(p.s1)]);
            w.row(&row)?;
        }
        written.push(w.finish()?);
    }

    if !result.equilibrium.is_empty() {
        let mut header = strings(&["state_id", "occupations", "C", "E_mean", "PR_over_dim"]);
        header.extend(p_headers(n));
        header.extend(strings(&["n1_eq", "S1_eq"]));
        let mut w = CsvOut::create(dir, "equilibrium.csv", &header)?;
        for e in &result.equilibrium {
            let mut row = vec![e.state_id.to_string(), e.state.to_string(), fmt(e.crowding), fmt(e.mean_energy), fmt(e.pr_over_dim)];
            row.extend(e.distribution.probabilities.iter().map(|&x| fmt(x)));
            row.extend([fmt(e.n1), fmt(e.s1)]);
            w.row(&row)?;
        }
        written.push(w.finish()?);

        let mut w = CsvOut::create(
            dir,
            "equilibrium_diagnostics.csv",
            &strings(&["state_id", "S1_of_mean", "n1_de", "S1_de", "TD_de", "S1_mc", "S1_mc_of_mean"]),
        )?;
        for e in &result.equilibrium {
            w.row(&[
                e.state_id.to_string(),
                fmt(e.s1_of_mean),
                fmt(n_site(&e.diagonal_ensemble)),
                fmt(e.s1_diagonal_ensemble),
                fmt(e.td_diagonal_ensemble),
                fmt(e.s1_micro),
                fmt(e.s1_micro_of_mean),
            ])?;
        }
        written.push(w.finish()?);

        let mut w = CsvOut::create(dir, "verdicts.csv", &strings(&["state_id", "TD", "delta_S_rel", "thermal"]))?;
        for (e, v) in result.equilibrium.iter().zip(&result.verdicts) {
            w.row(&[e.state_id.to_string(), fmt(v.td), fmt(v.delta_s_rel), v.thermal.to_string()])?;
        }
        written.push(w.finish()?);
    }

    written.push(write_manifest(&result.config, dir, result.realizations.len(), None)?);
    Ok(written)
}

/// Writes the quench trajectory as `quench.csv` (`t,n1,S1,P0..PN`).
pub fn emit_quench(traj: &QuenchTrajectory, config: &CampaignConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut header = strings(&["t", "n1", "S1"]);
    header.extend(p_headers(config.particles));
    let mut w = CsvOut::create(dir, "quench.csv", &header)?;
    for (j, &t) in traj.times.iter().enumerate() {
        let mut row = vec![fmt(t), fmt(traj.n1[j]), fmt(traj.s1[j])];
        row.extend(traj.distributions[j].probabilities.iter().map(|&x| fmt(x)));
        w.row(&row)?;
    }
    Ok(vec![w.finish()?, write_manifest(config, dir, traj.s1_per_realization.len(), None)?])
}

#[derive(Serialize)]
struct Manifest<'a> {
    code_version: &'a str,
    realizations_completed: usize,
    phase_seed: String,
    phase_streams: &'a str,
    phases: Vec<f64>,
    failures: Vec<String>,
    config: &'a CampaignConfig,
}

fn write_manifest(config: &CampaignConfig, dir: &Path, completed: usize, failures: Option<&[String]>) -> Result<PathBuf> {
    let seed = config.phase_seed();
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION"),
        realizations_completed: completed,
        phase_seed: format!("{seed:#018x}"),
        phase_streams: "ChaCha8 stream k of the phase seed; the phase seed mixes master_seed with (N, M), so sizes use independent phases",
        phases: sample_phases(seed, config.realizations),
        failures: failures.map(|f| f.to_vec()).unwrap_or_default(),
        config,
    };
    let name = if failures.is_some() { "error_manifest.toml" } else { "manifest.toml" };
    let path = dir.join(name);
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_failure_manifest(config: &CampaignConfig, ok: &[RealizationOutput], failures: &[String]) -> Result<()> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = CsvOut::create(
        dir,
        "realizations_partial.csv",
        &strings(&["realization", "phi", "E_min", "E_max", "r_mean", "near_degenerate_gaps"]),
    )?;
    for r in ok.iter().map(summarize) {
        w.row(&[r.index.to_string(), fmt(r.phase), fmt(r.e_min), fmt(r.e_max), fmt(r.r_mean), r.near_degenerate_gaps.to_string()])?;
    }
    w.finish()?;
    write_manifest(config, dir, ok.len(), Some(failures))?;
    Ok(())
}
