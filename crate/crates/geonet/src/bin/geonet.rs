// geonet command-line runner: net construction and verification,
// scrambling, replicated estimation, and the variance/normality/coverage
// experiment suite, all deterministic under --seed.
//
// Run examples:
//   geonet net-verify --b 4 --s 2 --m 3
//   geonet scramble --b 4 --s 2 --m 3 --seed 7 --rep 1 --out net.txt
//   geonet estimate --integrand tri-poly --domain T2^2 --m 6 --reps 300 --seed 1 --out report.json
//   geonet variance-decay --integrand tri-poly --domain T2^2 --m-min 3 --m-max 7 --reps 300 --out decay.csv
//   geonet gain-table --b 4 --m 2 --s 2 --format csv
//   geonet variance-identity --m 2 --k-max 4 --reps 5000 --out identity.json
//
// Exit codes: 0 success, 2 property violation, 3 invalid usage or spec.
// Errors go to stderr as one JSON object per failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::process::ExitCode;

use geonet::analysis::variance_identity_check;
use geonet::estimator::{builtin_integrand, builtin_names, Integrand};
use geonet::experiments::{
    gain_consistency, run_ci_coverage, run_estimate, run_gain_table, run_mc_compare, run_normality,
    run_variance_decay,
};
use geonet::{
    default_depth, faure_generators, generate_net, read_net, scramble_net, verify_net, DigitalNet,
    FieldTable, ProductDomain, ScrambleKey,
};

const USAGE: &str = "\
geonet - scrambled geometric net quadrature toolkit

USAGE:
  geonet <SUBCOMMAND> [FLAGS]

SUBCOMMANDS:
  net-verify         generate (or load) a digital net and check the
                     equidistribution property by exhaustive box counting
  scramble           apply a nested uniform scramble and write the net in
                     the plain-text digit format
  estimate           replicated integral estimate with variance and CI
  variance-decay     SGN and MC variance for each m in a range
  normality          standardized estimates and their KS distance to N(0,1)
  ci-coverage        coverage of replicated confidence intervals
  mc-compare         paired SGN vs MC confidence-interval widths
  gain-table         closed-form and empirical gain coefficients
  variance-identity  replication variance vs gain-weighted decomposition

GLOBAL FLAGS:
  --seed U64         base seed (default 1); reruns are byte-identical
  --out PATH         output file (default stdout)
  --format csv|json  table format where both make sense
  --threads N        worker threads (default: available parallelism)

SELECTED SUBCOMMAND FLAGS:
  net-verify         --b B --s S --m M [--t T] [--in net.txt] [--k K]
  scramble           --b B --s S --m M [--k K] [--rep R] [--in net.txt] [--identity]
  estimate           --integrand NAME --domain SPEC --m M [--b B]
                     --reps N [--alpha A] [--mu MU] [--mc]
  variance-decay     --integrand NAME --domain SPEC --m-min A --m-max B --reps N
  normality          --integrand NAME --domain SPEC --m M --reps N [--mu MU]
  ci-coverage        --integrand NAME --domain SPEC --m M --intervals R
                     [--sigma-reps N] [--groups G] [--alpha A] [--inflate-sigma F]
  mc-compare         --integrand NAME --domain SPEC --m M --pairs P
                     [--sigma-reps N] [--alpha A] [--oracle-depth L]
  gain-table         --b B --m M --s S [--k-max K] [--no-empirical]
  variance-identity  [--integrand NAME] --m M [--b B] [--k-max K]
                     [--reps N] [--q Q]

DOMAINS:
  --domain takes the shorthand T2, T2^s, U, U^s (U uses --b as its split
  base) or a path to a file with one component per line:
    interval b lo hi
    triangle b Ax Ay Bx By Cx Cy

INTEGRANDS:
  tri-poly (alias example1), tri-exp (alias example2), x1, x1x2,
  const, const:<c>; or a path to a file with lines `name <builtin>` and
  optionally `mu <value>` to attach a known mean.
";

struct CliError {
    msg: String,
    code: u8,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> CliError {
        CliError {
            msg: msg.into(),
            code: 3,
        }
    }

    fn violation(msg: impl Into<String>) -> CliError {
        CliError {
            msg: msg.into(),
            code: 2,
        }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError {
            msg: e.to_string(),
            code: 3,
        }
    }
}

struct Flags {
    sub: String,
    values: BTreeMap<String, String>,
    switches: Vec<String>,
}

impl Flags {
    fn parse(mut args: std::env::Args) -> Result<Flags, CliError> {
        args.next(); // program name
        let sub = match args.next() {
            Some(s) if s == "--help" || s == "-h" || s == "help" => {
                println!("{}", USAGE);
                std::process::exit(0);
            }
            Some(s) => s,
            None => return Err(CliError::usage("missing subcommand; see --help")),
        };
        let mut values = BTreeMap::new();
        let mut switches = Vec::new();
        let mut args = args.peekable();
        while let Some(arg) = args.next() {
            if arg == "--help" || arg == "-h" {
                println!("{}", USAGE);
                std::process::exit(0);
            }
            let Some(key) = arg.strip_prefix("--") else {
                return Err(CliError::usage(format!("unexpected argument {:?}", arg)));
            };
            let takes_value = args
                .peek()
                .map(|next| !next.starts_with("--"))
                .unwrap_or(false);
            if takes_value {
                values.insert(key.to_string(), args.next().expect("peeked"));
            } else {
                switches.push(key.to_string());
            }
        }
        Ok(Flags {
            sub,
            values,
            switches,
        })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            Some(v) => v
                .parse()
                .map_err(|e| CliError::usage(format!("--{} {:?}: {}", key, v, e))),
            None => Ok(default),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self
            .values
            .get(key)
            .ok_or_else(|| CliError::usage(format!("missing required flag --{}", key)))?;
        v.parse()
            .map_err(|e| CliError::usage(format!("--{} {:?}: {}", key, v, e)))
    }

    fn opt(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn switch(&self, key: &str) -> bool {
        self.switches.iter().any(|s| s == key)
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn write_output(out: Option<&str>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::usage(format!("cannot write {}: {}", path, e))),
        None => {
            print!("{}", content);
            if !content.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn load_domain(flags: &Flags, base: u8) -> Result<ProductDomain, CliError> {
    let spec = flags
        .opt("domain")
        .ok_or_else(|| CliError::usage("missing required flag --domain"))?;
    let text = if std::path::Path::new(spec).exists() {
        fs::read_to_string(spec)
            .map_err(|e| CliError::usage(format!("--domain {}: {}", spec, e)))?
    } else {
        spec.to_string()
    };
    Ok(ProductDomain::parse(&text, base)?)
}

fn load_integrand(flags: &Flags) -> Result<Integrand, CliError> {
    let name = flags.opt("integrand").unwrap_or("tri-poly");
    let mut integrand = match builtin_integrand(name) {
        Some(b) => b.integrand,
        None if std::path::Path::new(name).exists() => {
            let text = fs::read_to_string(name)
                .map_err(|e| CliError::usage(format!("--integrand {}: {}", name, e)))?;
            integrand_from_file(&text)?
        }
        None => {
            return Err(CliError::usage(format!(
                "unknown integrand {:?}; built-ins: {:?} or a spec file",
                name,
                builtin_names()
            )))
        }
    };
    if let Some(mu) = flags.opt("mu") {
        let mu: f64 = mu
            .parse()
            .map_err(|e| CliError::usage(format!("--mu {:?}: {}", mu, e)))?;
        integrand = integrand.with_known_mean(mu, "user supplied");
    }
    Ok(integrand)
}

/// Integrand spec file: `name <builtin>` plus optional `mu <value>`.
fn integrand_from_file(text: &str) -> Result<Integrand, CliError> {
    let mut name = None;
    let mut mu = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["name", n] => name = Some(n.to_string()),
            ["mu", v] => {
                mu =
                    Some(v.parse::<f64>().map_err(|e| {
                        CliError::usage(format!("integrand file mu {:?}: {}", v, e))
                    })?)
            }
            _ => {
                return Err(CliError::usage(format!(
                    "bad integrand file line {:?}",
                    line
                )))
            }
        }
    }
    let name = name.ok_or_else(|| CliError::usage("integrand file needs a `name` line"))?;
    let built = builtin_integrand(&name).ok_or_else(|| {
        CliError::usage(format!("integrand file names unknown builtin {:?}", name))
    })?;
    Ok(match mu {
        Some(mu) => built.integrand.with_known_mean(mu, "integrand file"),
        None => built.integrand,
    })
}

fn build_or_load_net(flags: &Flags) -> Result<DigitalNet, CliError> {
    if let Some(path) = flags.opt("in") {
        let file =
            fs::File::open(path).map_err(|e| CliError::usage(format!("--in {}: {}", path, e)))?;
        return Ok(read_net(std::io::BufReader::new(file))?);
    }
    let b: u8 = flags.require("b")?;
    let s: usize = flags.require("s")?;
    let m: u32 = flags.require("m")?;
    let field = FieldTable::new(b)?;
    let gen = faure_generators(field, s, m as usize)?;
    let depth: usize = flags.get("k", default_depth(b, m))?;
    Ok(generate_net(&gen, depth)?)
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn run() -> Result<u8, CliError> {
    let flags = Flags::parse(std::env::args())?;
    let seed: u64 = flags.get("seed", 1)?;
    let threads: usize = flags.get("threads", default_threads())?;
    let format = flags.opt("format").unwrap_or_default().to_string();
    let out = flags.opt("out");

    match flags.sub.as_str() {
        "net-verify" => {
            let net = build_or_load_net(&flags)?;
            let t: u32 = flags.get("t", net.t)?;
            let check = verify_net(&net, t)?;
            #[derive(serde::Serialize)]
            struct VerifyOut {
                schema_version: u32,
                ok: bool,
                b: u8,
                m: u32,
                t: u32,
                s: usize,
                n: usize,
                violation: Option<String>,
            }
            let report = VerifyOut {
                schema_version: 1,
                ok: check.ok,
                b: net.base,
                m: net.m,
                t,
                s: net.s,
                n: net.n(),
                violation: check.violation.as_ref().map(|v| v.to_string()),
            };
            write_output(out, &json_line(&report))?;
            Ok(if check.ok { 0 } else { 2 })
        }
        "scramble" => {
            let net = build_or_load_net(&flags)?;
            let rep: u64 = flags.get("rep", 1)?;
            let key = if flags.switch("identity") {
                ScrambleKey::identity()
            } else {
                ScrambleKey::new(seed, rep)
            };
            let scrambled = scramble_net(&net, &key);
            let mut buf = Vec::new();
            let mode = if flags.switch("identity") {
                "identity"
            } else {
                "keyed"
            };
            geonet::write_net(
                &scrambled,
                &[format!(
                    "scramble seed={} replication={} mode={}",
                    seed, rep, mode
                )],
                &mut buf,
            )
            .map_err(|e| CliError::usage(e.to_string()))?;
            let text = String::from_utf8(buf).expect("digit format is ascii");
            write_output(out, &text)?;
            Ok(0)
        }
        "estimate" => {
            let f = load_integrand(&flags)?;
            let b: u8 = flags.get("b", 4)?;
            let dom = load_domain(&flags, b)?;
            let m: u32 = flags.require("m")?;
            let reps: usize = flags.get("reps", 100)?;
            let alpha: f64 = flags.get("alpha", 0.05)?;
            let report = run_estimate(&f, &dom, m, reps, seed, alpha, flags.switch("mc"), threads)?;
            write_output(out, &json_line(&report))?;
            Ok(0)
        }
        "variance-decay" => {
            let f = load_integrand(&flags)?;
            let b: u8 = flags.get("b", 4)?;
            let dom = load_domain(&flags, b)?;
            let m_min: u32 = flags.require("m-min")?;
            let m_max: u32 = flags.require("m-max")?;
            if m_min > m_max || m_min == 0 {
                return Err(CliError::usage("need 1 <= m-min <= m-max"));
            }
            let reps: usize = flags.get("reps", 300)?;
            let run = run_variance_decay(&f, &dom, m_min..=m_max, reps, seed, threads)?;
            let text = if format == "json" {
                json_line(&run)
            } else {
                run.to_csv()
            };
            write_output(out, &text)?;
            Ok(0)
        }
        "normality" => {
            let f = load_integrand(&flags)?;
            let b: u8 = flags.get("b", 4)?;
            let dom = load_domain(&flags, b)?;
            let m: u32 = flags.require("m")?;
            let reps: usize = flags.get("reps", 300)?;
            let run = run_normality(&f, &dom, m, reps, seed, threads)?;
            let text = if format == "csv" {
                run.to_csv()
            } else {
                json_line(&run)
            };
            write_output(out, &text)?;
            Ok(0)
        }
        "ci-coverage" => {
            let f = load_integrand(&flags)?;
            let b: u8 = flags.get("b", 4)?;
            let dom = load_domain(&flags, b)?;
            let m: u32 = flags.require("m")?;
            let intervals: usize = flags.get("intervals", 100)?;
            let sigma_reps: usize = flags.get("sigma-reps", 100)?;
            let groups: usize = flags.get("groups", (intervals / 50).max(1))?;
            let alpha: f64 = flags.get("alpha", 0.05)?;
            let inflate: f64 = flags.get("inflate-sigma", 1.0)?;
            let run = run_ci_coverage(
                &f, &dom, m, intervals, sigma_reps, groups, alpha, inflate, seed, threads,
            )?;
            let text = if format == "json" {
                json_line(&run)
            } else {
                run.to_csv()
            };
            write_output(out, &text)?;
            Ok(0)
        }
        "mc-compare" => {
            let f = load_integrand(&flags)?;
            let b: u8 = flags.get("b", 4)?;
            let dom = load_domain(&flags, b)?;
            let m: u32 = flags.require("m")?;
            let pairs: usize = flags.get("pairs", 100)?;
            let sigma_reps: usize = flags.get("sigma-reps", 30)?;
            let alpha: f64 = flags.get("alpha", 0.05)?;
            let oracle_depth: u32 = flags.get("oracle-depth", 5)?;
            let run = run_mc_compare(
                &f,
                &dom,
                m,
                pairs,
                sigma_reps,
                alpha,
                seed,
                threads,
                Some(oracle_depth),
            )?;
            let text = if format == "json" {
                json_line(&run)
            } else {
                run.to_csv()
            };
            write_output(out, &text)?;
            Ok(0)
        }
        "gain-table" => {
            let b: u8 = flags.require("b")?;
            let m: u32 = flags.require("m")?;
            let s: usize = flags.require("s")?;
            let k_max: u32 = flags.get("k-max", m + 2)?;
            let run = run_gain_table(b, m, s, k_max, !flags.switch("no-empirical"))?;
            let text = if format == "json" {
                json_line(&run)
            } else {
                run.to_csv()
            };
            write_output(out, &text)?;
            match gain_consistency(&run, 1e-9) {
                Ok(()) => Ok(0),
                Err(msg) => Err(CliError::violation(msg)),
            }
        }
        "variance-identity" => {
            let f = match flags.opt("integrand") {
                None => builtin_integrand("x1").expect("built-in").integrand,
                Some(_) => load_integrand(&flags)?,
            };
            let b: u8 = flags.get("b", 4)?;
            let m: u32 = flags.require("m")?;
            let k_max: u32 = flags.get("k-max", 4)?;
            let reps: usize = flags.get("reps", 5000)?;
            let q: u32 = flags.get("q", 3)?;
            let field = FieldTable::new(b)?;
            let gen = faure_generators(field, 1, m as usize)?;
            let net = generate_net(&gen, default_depth(b, m))?;
            let dom = if b == 4 {
                ProductDomain::triangles(1)
            } else {
                ProductDomain::parse("U", b)?
            };
            let check = variance_identity_check(&f, &net, &dom, k_max, reps, seed, q, threads)?;
            let ok = check.gap <= 3.0 * check.lhs_se + check.tail_bound;
            write_output(out, &json_line(&check))?;
            Ok(if ok { 0 } else { 2 })
        }
        other => Err(CliError::usage(format!(
            "unknown subcommand {:?}; see --help",
            other
        ))),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            let payload = serde_json::json!({ "error": err.msg, "code": err.code });
            let mut stderr = std::io::stderr();
            let _ = writeln!(stderr, "{}", payload);
            ExitCode::from(err.code)
        }
    }
}
