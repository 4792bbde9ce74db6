//! Command dispatch behind the `densimodel` binary.

use std::path::PathBuf;
use std::str::FromStr;

use num_rational::BigRational;
use serde_json::{json, Value};

use crate::cache::{cache_key, Cache};
use crate::error::{Error, Result};
use crate::fiber::{
    build_kappa_algebra, conjecture_check, enumerate_gtilde, krank, local_density,
    oracle_start_level, oracle_table, rational_to_string, OracleConvention, DEFAULT_BUDGET,
};
use crate::lattice::{dual_of, QuadraticLattice};
use crate::linalg::{scaled_inverse, ALattice, MatrixA};
use crate::model::{stabilize, ModelContext, ModelOptions, ModelResult};
use crate::report;
use crate::spec_file::{parse_spec, LatticeSpecFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_PRECISION: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_CONJECTURE: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Model,
    Density,
    Oracle,
    Conjecture,
    Selfcheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Model => "model",
            Command::Density => "density",
            Command::Oracle => "oracle",
            Command::Conjecture => "conjecture",
            Command::Selfcheck => "selfcheck",
        }
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "model" => Command::Model,
            "density" => Command::Density,
            "oracle" => Command::Oracle,
            "conjecture" => Command::Conjecture,
            "selfcheck" => Command::Selfcheck,
            _ => {
                return Err(Error::Parse {
                    line: 0,
                    column: 0,
                    message: format!("unknown command '{s}'"),
                })
            }
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub precision: Option<u32>,
    pub budget: Option<u128>,
    pub kmax: Option<u32>,
    pub strict: bool,
    pub no_cache: bool,
    pub pretty: bool,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    /// Canonical report (absent on error).
    pub report: Option<Value>,
    /// What goes to stdout.
    pub stdout: String,
    /// What goes to stderr.
    pub stderr: String,
    pub cache_hit: bool,
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        Error::PrecisionExhausted(_) => EXIT_PRECISION,
        Error::Parse { .. }
        | Error::NonEisenstein(_)
        | Error::ReduciblePolynomial(_)
        | Error::InvalidRing(_)
        | Error::DegenerateForm => EXIT_PARSE,
        _ => EXIT_FAILURE,
    }
}

fn resolve(spec: &LatticeSpecFile, flags: &Flags) -> ResolvedFlags {
    ResolvedFlags {
        precision: flags.precision.or(spec.options.precision_cap),
        budget: flags
            .budget
            .or(spec.options.enum_budget)
            .unwrap_or(DEFAULT_BUDGET),
        kmax: flags.kmax.or(spec.options.oracle_kmax),
    }
}

fn gram_strings(l: &QuadraticLattice) -> Vec<Vec<String>> {
    let g = l.gram();
    (0..g.rows())
        .map(|i| (0..g.cols()).map(|j| g.get(i, j).to_string()).collect())
        .collect()
}

fn lattice_summary(spec: &LatticeSpecFile, l: &QuadraticLattice) -> Value {
    let blocks: Vec<Value> = spec
        .blocks
        .iter()
        .map(|b| json!({"scale": b.scale, "block": b.block}))
        .collect();
    json!({
        "ring": l.ring().record(),
        "blocks": blocks,
        "rank": l.rank(),
        "gram": gram_strings(l),
    })
}

/// Material hashed into the cache key: ring, Gram matrix, command and the
/// flags that influence the result.
pub fn key_material(command: Command, l: &QuadraticLattice, r: &ResolvedFlags) -> String {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "ring": l.ring().record(),
        "gram": gram_strings(l),
        "command": command.name(),
        "precision": r.precision,
        "budget": r.budget.to_string(),
        "kmax": r.kmax,
    })
    .to_string()
}

/// Effective settings after merging flags and spec options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedFlags {
    pub precision: Option<u32>,
    pub budget: u128,
    pub kmax: Option<u32>,
}

fn model_of(l: &QuadraticLattice, precision: Option<u32>) -> Result<(ModelContext, ModelResult)> {
    let opts = ModelOptions {
        precision,
        ..ModelOptions::default()
    };
    let m = stabilize(l, opts)?;
    let ctx = ModelContext::new(l, m.precision)?;
    Ok((ctx, m))
}

fn rat(r: &BigRational) -> Value {
    Value::String(rational_to_string(r))
}

fn density_fields(
    l: &QuadraticLattice,
    ctx: &ModelContext,
    m: &ModelResult,
    budget: u128,
) -> Result<Value> {
    let alg = build_kappa_algebra(ctx, m)?;
    let count = enumerate_gtilde(&alg, budget, false)?.count;
    let d = local_density(l.ring().q(), m.n, m.dim_g, count);
    Ok(json!({
        "alpha": m.alpha,
        "N": m.n,
        "dim_G": m.dim_g,
        "Gtilde_count": count,
        "density": rat(&d.value),
        "density_num": d.value.numer().to_string(),
        "density_den": d.value.denom().to_string(),
        "cs_normalized": rat(&d.cs_normalized),
    }))
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

/// Runs one command on a parsed spec and returns the canonical report.
pub fn execute(command: Command, spec: &LatticeSpecFile, flags: &Flags) -> Result<Value> {
    let l = spec.lattice()?;
    let r = resolve(spec, flags);
    let mut out = json!({
        "command": command.name(),
        "lattice": lattice_summary(spec, &l),
    });
    match command {
        Command::Model => {
            let (_, m) = model_of(&l, r.precision)?;
            merge(
                &mut out,
                json!({
                    "alpha": m.alpha,
                    "N1": m.n1,
                    "N2": m.n2,
                    "N": m.n,
                    "dim_G": m.dim_g,
                    "precision": m.precision,
                    "T_pattern": m.t_pattern,
                    "H_pattern": m.h_pattern,
                    "warnings": m.warnings,
                }),
            );
        }
        Command::Density => {
            let (ctx, m) = model_of(&l, r.precision)?;
            merge(&mut out, density_fields(&l, &ctx, &m, r.budget)?);
        }
        Command::Oracle => {
            let kmax = r.kmax.unwrap_or(oracle_start_level(&l) + 2);
            let res = oracle_table(&l, kmax, r.budget, OracleConvention::Gram)?;
            let ratios: Vec<Value> = res.ratios.iter().map(|(k, x)| json!([k, rat(x)])).collect();
            let counts: Vec<Value> = res.counts.iter().map(|(k, c)| json!([k, c])).collect();
            merge(
                &mut out,
                json!({
                    "kmax": kmax,
                    "convention": "gram",
                    "oracle": ratios,
                    "counts": counts,
                    "stable_at": res.stable_at,
                    "density": res.beta().as_ref().map(rat),
                }),
            );
        }
        Command::Conjecture => {
            let (ctx, m) = model_of(&l, r.precision)?;
            let alg = build_kappa_algebra(&ctx, &m)?;
            let c = conjecture_check(&l, &m, &alg, r.budget)?;
            let d = local_density(l.ring().q(), m.n, m.dim_g, c.gtilde_count);
            merge(
                &mut out,
                json!({
                    "alpha": m.alpha,
                    "N": m.n,
                    "dim_G": m.dim_g,
                    "Gtilde_count": c.gtilde_count,
                    "density": rat(&d.value),
                    "cs_normalized": rat(&d.cs_normalized),
                    "conjecture": {
                        "l": c.l,
                        "beta": c.beta,
                        "surjective": c.surjective,
                        "holds": c.holds,
                        "image_size": c.image_size,
                        "kernel_size": c.kernel_size,
                        "groups": c.groups,
                    },
                }),
            );
        }
        Command::Selfcheck => {
            let checks = selfcheck(&l, r.precision)?;
            let passed = checks.iter().all(|c| c.1);
            let list: Vec<Value> = checks
                .into_iter()
                .map(|(name, ok, detail)| json!({"check": name, "passed": ok, "detail": detail}))
                .collect();
            merge(&mut out, json!({"checks": list, "passed": passed}));
        }
    }
    Ok(out)
}

/// Exit status implied by a successful report.
pub fn report_exit_code(command: Command, report: &Value, strict: bool) -> i32 {
    match command {
        Command::Conjecture if strict => {
            if report["conjecture"]["holds"] == Value::Bool(true) {
                EXIT_OK
            } else {
                EXIT_CONJECTURE
            }
        }
        Command::Selfcheck if report["passed"] != Value::Bool(true) => EXIT_FAILURE,
        _ => EXIT_OK,
    }
}

fn failure(e: &Error) -> Outcome {
    Outcome {
        exit_code: exit_code_for(e),
        report: None,
        stdout: String::new(),
        stderr: format!("error: {e}\n"),
        cache_hit: false,
    }
}

/// Parse, consult the cache, execute and format; never panics on bad input.
pub fn run(command: Command, spec_text: &str, flags: &Flags) -> Outcome {
    let spec = match parse_spec(spec_text) {
        Ok(s) => s,
        Err(e) => return failure(&e),
    };
    let l = match spec.lattice() {
        Ok(l) => l,
        Err(e) => return failure(&e),
    };
    let resolved = resolve(&spec, flags);
    let cache = if flags.no_cache {
        None
    } else {
        Cache::from_env(flags.cache_dir.as_deref())
    };
    let key = cache_key(&key_material(command, &l, &resolved));
    let mut stderr = String::new();
    let mut cache_hit = false;
    let cached = cache.as_ref().and_then(|c| c.get(&key));
    let report = match cached {
        Some(v) => {
            cache_hit = true;
            v
        }
        None => match execute(command, &spec, flags) {
            Ok(v) => {
                if let Some(c) = &cache {
                    if let Err(e) = c.put(&key, &v) {
                        stderr.push_str(&format!("warning: cache write failed: {e}\n"));
                    }
                }
                v
            }
            Err(e) => return failure(&e),
        },
    };
    let exit_code = report_exit_code(command, &report, flags.strict);
    if exit_code == EXIT_CONJECTURE {
        stderr.push_str("conjecture check failed: flagged as a research finding\n");
    }
    let stdout = if flags.pretty {
        report::pretty(&report)
    } else {
        report::canonical(&report)
    };
    Outcome {
        exit_code,
        report: Some(report),
        stdout,
        stderr,
        cache_hit,
    }
}

/// Invariant checks on one lattice: `(name, passed, detail)`.
pub fn selfcheck(l: &QuadraticLattice, precision: Option<u32>) -> Result<Vec<(String, bool, String)>> {
    let mut out = Vec::new();
    let mut push = |name: &str, ok: bool, detail: String| out.push((name.to_string(), ok, detail));
    let ring = l.ring().clone();
    let n = l.rank();

    let dd = dual_of(l, &l.dual()?)?;
    push("double_dual", dd == ALattice::standard(&ring, n), String::new());

    let (ctx, m) = model_of(l, precision)?;
    let t0 = &m.chain[0].lattice;
    let nested = m.chain.windows(2).all(|w| w[1].lattice.is_sublattice_of(&w[0].lattice));
    let full = m.chain.iter().all(|t| t.lattice.dim() == n * n);
    let bounded = if m.chain.len() > 1 {
        let l1 = ModelContext::torsion_exponent(t0, &m.chain[1].lattice);
        let bound = t0.scaled(2 * l1 as i64);
        m.chain.iter().all(|t| bound.is_sublattice_of(&t.lattice))
    } else {
        true
    };
    push(
        "chain_rank_and_bound",
        nested && full && bounded,
        format!("chain length {}", m.chain.len()),
    );

    let basis = m.t_tilde.basis_matrices();
    let mut closed = true;
    for x in &basis {
        closed &= m.t_tilde.contains(&ctx.adjoint(x)?);
        for y in &basis {
            closed &= m.t_tilde.contains(&x.mul(y));
        }
    }
    push("t_tilde_closure", closed, format!("{} basis elements", basis.len()));

    push("h_in_h0", m.h0.contains(l.gram()), String::new());

    let s = l.gram();
    let id = MatrixA::identity(&ring, n);
    let mut lands = true;
    let mut inverse = true;
    for x in &basis {
        let g = id.add(x);
        lands &= m.h_tilde.contains(&g.transpose().mul(s).mul(&g).sub(s));
        if g.det().is_unit() {
            let (inv, d) = scaled_inverse(&g, ctx.cap)?;
            inverse &= d == 0 && m.t_tilde.contains(&inv.sub(&id));
        }
    }
    push("action_in_h_tilde", lands, String::new());
    push("inverse_closure", inverse, String::new());

    let alg = build_kappa_algebra(&ctx, &m)?;
    let rank = krank(ring.residue_field(), &alg.gamma);
    push(
        "psi_surjective_mod_pi",
        rank == alg.r,
        format!("rank {rank} of {}", alg.r),
    );
    Ok(out)
}
