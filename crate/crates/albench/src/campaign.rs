//! Campaign configuration, validation, and the scheduler that turns a
//! config file into traces, reports, and a manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{build_test_set, write_report, ErrorCurve, SummaryRow, TestSet};
use crate::driver::{run_active_learning, RunConfig};
use crate::error::{Error, Result};
use crate::kernel::KernelKind;
use crate::regress::{FitConfig, ModelKind};
use crate::sample::StrategyKind;
use crate::sim::{Simulator, SimulatorSpec};
use crate::space::{
    build_pool, default_initial_count, CandidatePool, DimensionSpec, InitRule, ParameterSpace,
    PoolSpec,
};

/// One benchmark case: a simulator plus its sampling setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    pub simulator: SimulatorSpec,
    /// Required for table and command simulators; analytic builtins carry
    /// their own space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<Vec<DimensionSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_label: Option<String>,
    #[serde(default = "default_n0_rule")]
    pub n0_rule: InitRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PoolSpec>,
}

fn default_n0_rule() -> InitRule {
    InitRule::FourNf
}

/// One regressor configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Identifier used in file paths and reports; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// GP kernel; only valid with kind = gp. Default matern52.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelKind>,
    /// Per-model strategy override; defaults to the campaign-wide list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<StrategyKind>>,
}

impl ModelConfig {
    pub fn id(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.as_str().to_string())
    }

    pub fn fit_config(&self) -> FitConfig<f64> {
        FitConfig::with_kernel(self.kernel.unwrap_or(KernelKind::Matern52))
    }

    fn strategies<'a>(&'a self, fallback: &'a [StrategyKind]) -> &'a [StrategyKind] {
        self.strategies.as_deref().unwrap_or(fallback)
    }
}

/// A full benchmark campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub cases: Vec<CaseConfig>,
    pub models: Vec<ModelConfig>,
    pub strategies: Vec<StrategyKind>,
    pub n_queries: usize,
    #[serde(default = "default_n_reps")]
    pub n_reps: usize,
    #[serde(default = "default_n_e")]
    pub n_e: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_query_marks")]
    pub query_marks: Vec<usize>,
    #[serde(default = "default_cap")]
    pub cap: f64,
}

fn default_n_reps() -> usize {
    10
}

fn default_n_e() -> usize {
    100
}

fn default_query_marks() -> Vec<usize> {
    vec![5, 10, 20]
}

fn default_cap() -> f64 {
    100.0
}

impl CampaignConfig {
    /// Cross-field validation; every failing pair is reported before any
    /// simulation runs.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if self.cases.is_empty() || self.models.is_empty() {
            return err("a campaign needs at least one case and one model".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &self.cases {
            if c.name.is_empty() || c.name.contains(['/', ',']) {
                return err(format!("case name `{}` must be non-empty without '/' or ','", c.name));
            }
            if !names.insert(&c.name) {
                return err(format!("duplicate case name `{}`", c.name));
            }
            // Analytic builtins define their own space; fail early on
            // unknown names and contradictory overrides.
            case_simulator(c)?;
        }
        let mut ids = std::collections::BTreeSet::new();
        for m in &self.models {
            let id = m.id();
            if id.is_empty() || id.contains(['/', ',']) {
                return err(format!("model id `{id}` must be non-empty without '/' or ','"));
            }
            if !ids.insert(id.clone()) {
                return err(format!("duplicate model id `{id}`"));
            }
            if m.kernel.is_some() && m.kind != ModelKind::Gp {
                return err(format!("model `{id}`: kernel is only valid for gp"));
            }
            let strategies = m.strategies(&self.strategies);
            if strategies.is_empty() {
                return err(format!("model `{id}` has no strategies"));
            }
            for s in strategies {
                if s.needs_std() && m.kind != ModelKind::Gp {
                    return err(format!(
                        "model `{id}`: strategy `{}` requires a model with predictive \
                         standard deviation (gp)",
                        s.token()
                    ));
                }
            }
        }
        if self.strategies.is_empty() && self.models.iter().any(|m| m.strategies.is_none()) {
            return err("empty campaign-wide strategy list".into());
        }
        if self.n_reps < 1 || self.n_e < 1 {
            return err("n_reps and n_e must be at least 1".into());
        }
        if self.query_marks.is_empty()
            || self.query_marks.iter().any(|&q| q < 1 || q > self.n_queries)
        {
            return err(format!(
                "query_marks must be within 1..={}, got {:?}",
                self.n_queries, self.query_marks
            ));
        }
        if !(self.cap > 0.0) {
            return err(format!("cap must be positive, got {}", self.cap));
        }
        Ok(())
    }
}

/// Parses and validates a campaign config file (strict JSON schema).
pub fn parse_config(path: &Path) -> Result<CampaignConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: CampaignConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// FNV-1a, the documented platform-independent identifier hash behind
/// per-run seeds.
pub fn fnv1a64(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// seed = base_seed + fnv1a64("case/model/strategy") + rep (wrapping).
pub fn run_seed(base_seed: u64, case: &str, model: &str, strategy: StrategyKind, rep: usize) -> u64 {
    base_seed
        .wrapping_add(fnv1a64(&format!("{case}/{model}/{}", strategy.token())))
        .wrapping_add(rep as u64)
}

/// Test sets are shared by every model/strategy/rep of a case.
pub fn test_set_seed(base_seed: u64, case: &str) -> u64 {
    base_seed.wrapping_add(fnv1a64(&format!("{case}/test_set")))
}

fn case_simulator(case: &CaseConfig) -> Result<Simulator> {
    use crate::sim::BackendSpec;
    if matches!(case.simulator.backend, BackendSpec::Analytic { .. })
        && (case.space.is_some() || case.response_label.is_some())
    {
        return Err(Error::Config(format!(
            "case `{}`: analytic simulators carry their own space and response label",
            case.name
        )));
    }
    let space = case
        .space
        .clone()
        .map(ParameterSpace::new)
        .transpose()?;
    Simulator::from_spec(case.simulator.clone(), space, case.response_label.as_deref())
}

/// One (case, model, strategy, rep) cell of the campaign grid.
#[derive(Debug, Clone, Serialize)]
struct CellId {
    case: String,
    model: String,
    strategy: String,
    rep: usize,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool_version: String,
    config_sha256: String,
    cells: Vec<CellId>,
    failures: Vec<String>,
}

/// Everything a finished campaign leaves on disk, plus in-memory summary.
#[derive(Debug)]
pub struct CampaignResult {
    pub output_dir: PathBuf,
    pub summary: Vec<SummaryRow>,
    /// Human-readable descriptions of failed cells; empty on full success.
    pub failures: Vec<String>,
}

struct CaseRuntime {
    config: CaseConfig,
    sim: Simulator,
    pool: CandidatePool,
    test_set: TestSet,
    n0: usize,
}

/// Runs every (case x model x strategy x rep) cell, writes traces under
/// `runs/<case>/<model>/<strategy>/rep<k>.json`, then the report files and
/// a manifest. Re-running the same config is idempotent byte-for-byte.
/// Independent cells run in parallel across `jobs` threads (default 1).
pub fn run_campaign(config: &CampaignConfig, jobs: usize) -> Result<CampaignResult> {
    config.validate()?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut cases = Vec::new();
    for c in &config.cases {
        let sim = case_simulator(c)?;
        let space = sim.space().clone();
        let pool_spec = c
            .pool
            .clone()
            .unwrap_or_else(|| PoolSpec::default_for(space.n_features()));
        let pool = build_pool(&space, &pool_spec)?;
        let test_set = build_test_set(
            &space,
            &sim,
            config.n_e,
            test_set_seed(config.base_seed, &c.name),
        )?;
        let n0 = default_initial_count(c.n0_rule, space.n_features());
        cases.push(CaseRuntime {
            config: c.clone(),
            sim,
            pool,
            test_set,
            n0,
        });
    }

    // Enumerate cells in deterministic order.
    let mut cells: Vec<(usize, usize, StrategyKind, usize)> = Vec::new();
    for (ci, _) in cases.iter().enumerate() {
        for (mi, m) in config.models.iter().enumerate() {
            for &s in m.strategies(&config.strategies) {
                for rep in 0..config.n_reps {
                    cells.push((ci, mi, s, rep));
                }
            }
        }
    }

    let run_cell = |&(ci, mi, strategy, rep): &(usize, usize, StrategyKind, usize)| {
        let case = &cases[ci];
        let model = &config.models[mi];
        let seed = run_seed(config.base_seed, &case.config.name, &model.id(), strategy, rep);
        let run_config = RunConfig {
            strategy,
            model_kind: model.kind,
            fit: model.fit_config(),
            n0: case.n0,
            n_queries: config.n_queries,
            seed,
            trace_errors: true,
        };
        let mut pool = case.pool.clone();
        let trace = run_active_learning(&mut pool, &case.sim, &run_config, Some(&case.test_set))?;
        Ok::<_, Error>((ci, mi, strategy, rep, seed, trace))
    };

    let worker = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Bench(format!("thread pool: {e}")))?;
    let outcomes: Vec<_> = worker.install(|| cells.par_iter().map(run_cell).collect());

    // Single-writer phase: traces, report, manifest.
    let mut curves = Vec::new();
    let mut manifest_cells = Vec::new();
    let mut failures = Vec::new();
    for (cell, outcome) in cells.iter().zip(outcomes) {
        let (ci, mi, strategy, rep) = *cell;
        let case_name = &cases[ci].config.name;
        let model_id = config.models[mi].id();
        match outcome {
            Ok((_, _, _, _, seed, trace)) => {
                let dir = out
                    .join("runs")
                    .join(case_name)
                    .join(&model_id)
                    .join(strategy.token());
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let path = dir.join(format!("rep{rep}.json"));
                let text = serde_json::to_string_pretty(&trace)?;
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                curves.push(ErrorCurve {
                    case: case_name.clone(),
                    model: model_id.clone(),
                    strategy: strategy.abbreviation().to_string(),
                    rep,
                    errors_by_step: trace
                        .per_step_error
                        .as_ref()
                        .expect("campaign runs trace errors")
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| (i + 1, e))
                        .collect(),
                });
                manifest_cells.push(CellId {
                    case: case_name.clone(),
                    model: model_id,
                    strategy: strategy.token().to_string(),
                    rep,
                    seed,
                });
            }
            Err(e) => failures.push(format!(
                "{case_name}/{model_id}/{}/rep{rep}: {e}",
                strategy.token()
            )),
        }
    }

    let summary = if curves.is_empty() {
        Vec::new()
    } else {
        write_report(&curves, &config.query_marks, config.cap, out)?
    };

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_hash(config)?,
        cells: manifest_cells,
        failures: failures.clone(),
    };
    let manifest_path = out.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| Error::io(&manifest_path, e))?;

    Ok(CampaignResult {
        output_dir: out.clone(),
        summary,
        failures,
    })
}

/// SHA-256 of the canonical JSON serialization of the parsed config.
pub fn config_hash(config: &CampaignConfig) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_config(out: &Path) -> CampaignConfig {
        serde_json::from_value(serde_json::json!({
            "cases": [{
                "name": "multimodal",
                "simulator": {"kind": "analytic", "analytic_name": "multimodal_2d"},
                "pool": {"grid": {"points_per_dim": 15}}
            }],
            "models": [
                {"kind": "linear", "strategies": ["random", "gi", "go", "gio"]},
                {"kind": "gp"}
            ],
            "strategies": ["random", "gi", "go", "gio", "variational"],
            "n_queries": 5,
            "n_reps": 3,
            "n_e": 20,
            "base_seed": 11,
            "query_marks": [5],
            "output_dir": out.to_string_lossy()
        }))
        .unwrap()
    }

    #[test]
    fn defaults_are_filled() {
        let cfg: CampaignConfig = serde_json::from_value(serde_json::json!({
            "cases": [{"name": "a", "simulator": {"kind": "analytic", "analytic_name": "multimodal_2d"}}],
            "models": [{"kind": "gp"}],
            "strategies": ["random"],
            "n_queries": 20,
            "output_dir": "out"
        }))
        .unwrap();
        assert_eq!(cfg.n_reps, 10);
        assert_eq!(cfg.n_e, 100);
        assert_eq!(cfg.query_marks, vec![5, 10, 20]);
        assert_eq!(cfg.cap, 100.0);
        assert_eq!(cfg.base_seed, 0);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_pairs_rejected() {
        let unknown = serde_json::from_value::<CampaignConfig>(serde_json::json!({
            "cases": [], "models": [], "strategies": [], "n_queries": 1,
            "output_dir": "out", "foo": 1
        }));
        let msg = unknown.unwrap_err().to_string();
        assert!(msg.contains("foo"), "{msg}");

        let dir = tempfile::tempdir().unwrap();
        let mut cfg = demo_config(dir.path());
        cfg.models[0].strategies = Some(vec![StrategyKind::Variational]);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("variational") && err.contains("linear"), "{err}");

        let mut cfg = demo_config(dir.path());
        cfg.models[0].kernel = Some(KernelKind::Rbf);
        assert!(cfg.validate().is_err());

        let mut cfg = demo_config(dir.path());
        cfg.cases[0].simulator = SimulatorSpec::analytic("nope");
        assert!(cfg.validate().is_err());

        let mut cfg = demo_config(dir.path());
        cfg.query_marks = vec![50];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn strategy_token_aliases_accepted() {
        let s: Vec<StrategyKind> = serde_json::from_str(r#"["r", "v", "random"]"#).unwrap();
        assert_eq!(
            s,
            vec![StrategyKind::Random, StrategyKind::Variational, StrategyKind::Random]
        );
    }

    #[test]
    fn seed_derivation_is_documented_fnv() {
        // Frozen FNV-1a reference values.
        assert_eq!(fnv1a64(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64("a"), 0xaf63dc4c8601ec8c);
        assert_eq!(
            run_seed(5, "c", "m", StrategyKind::GreedyInput, 3),
            5u64.wrapping_add(fnv1a64("c/m/gi")).wrapping_add(3)
        );
        assert_ne!(
            test_set_seed(0, "case_a"),
            test_set_seed(0, "case_b")
        );
    }

    #[test]
    fn campaign_cardinality_and_idempotence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = demo_config(&dir.path().join("run1"));
        let result = run_campaign(&cfg, 2).unwrap();
        assert!(result.failures.is_empty());
        // linear: 4 strategies, gp: 5 strategies, 3 reps each.
        let traces: Vec<_> = walk_json(&result.output_dir.join("runs"));
        assert_eq!(traces.len(), 27);
        let detail = std::fs::read_to_string(result.output_dir.join("detail.csv")).unwrap();
        assert_eq!(detail.lines().count(), 1 + 27 * 5);
        // One summary row per strategy at the single mark.
        assert_eq!(result.summary.len(), 5);

        let cfg2 = demo_config(&dir.path().join("run2"));
        let result2 = run_campaign(&cfg2, 1).unwrap();
        for file in ["detail.csv", "summary.csv"] {
            let a = std::fs::read(result.output_dir.join(file)).unwrap();
            let b = std::fs::read(result2.output_dir.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between reruns");
        }
        // Traces match too, path by path.
        for t in &traces {
            let rel = t.strip_prefix(&result.output_dir).unwrap();
            assert_eq!(
                std::fs::read(t).unwrap(),
                std::fs::read(result2.output_dir.join(rel)).unwrap()
            );
        }

        // The manifest hash matches the parsed config.
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(result.output_dir.join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["config_sha256"], config_hash(&cfg).unwrap());
        assert_eq!(manifest["failures"].as_array().unwrap().len(), 0);
    }

    fn walk_json(root: &Path) -> Vec<PathBuf> {
        let mut found = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else if path.extension().is_some_and(|e| e == "json") {
                    found.push(path);
                }
            }
        }
        found.sort();
        found
    }
}
