//! `surjunct`: command-line experiments on cellular automata over marked
//! groups.
//!
//! Exit status: 0 success, 1 domain error, 2 parse or input error,
//! 3 resource cap exceeded.

mod input;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use surjunct::format::{parse_group_algebra_matrix, parse_kernel, write_kernel, write_rule};
use surjunct::lab::{compute_profile, periodic_oracle, Property};
use surjunct::window::ExplicitFamily;
use surjunct::{
    convergence_experiment, fix_window, gromov_radius, hb_agreement_radius, injectivity_transfer_check, is_injective_1d,
    is_surjective_1d, lin_decide, lin_inverse_kernel, limits, marked_distance, stable_finiteness_witness,
    synthesize_ca, AgreementRadius, BlackBox, CellularAutomaton, Error, FiniteConfiguration, FixSubshift,
    LinearKernel, PeriodicConfiguration, Side, StableFiniteness, WindowSet,
};

pub enum Failure {
    Domain(String),
    Input(String),
    Cap(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } => Failure::Input(e.to_string()),
            Error::ResourceCap { .. } => Failure::Cap(e.to_string()),
            Error::StageFailed { ref detail, .. } if detail.starts_with("resource cap") => Failure::Cap(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Parser)]
#[command(name = "surjunct", version, about = "Cellular automata over marked groups")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Resource cap on enumerations; overrides SURJUNCT_CAP.
    #[arg(long, global = true)]
    cap: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Agreement radius of two marked groups.
    MarkedDist {
        #[arg(long)]
        group1: String,
        #[arg(long)]
        group2: String,
        #[arg(long, default_value_t = 8)]
        rmax: usize,
    },
    /// Window projection of Fix(N) for a marked group G = F/N.
    FixWindow {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 2)]
        alphabet: usize,
        #[arg(long)]
        radius: usize,
        /// Also write the window set as CSV to this path.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Hausdorff-Bourbaki agreement radius of two Fix subshifts or two
    /// dumped window sets.
    HbDist {
        #[arg(long, conflicts_with = "windows1")]
        group1: Option<String>,
        #[arg(long, conflicts_with = "windows2")]
        group2: Option<String>,
        #[arg(long, requires = "rank")]
        windows1: Option<PathBuf>,
        #[arg(long, requires = "rank")]
        windows2: Option<PathBuf>,
        /// Rank of the free group, for CSV inputs.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 2)]
        alphabet: usize,
        #[arg(long, default_value_t = 8)]
        rmax: usize,
    },
    /// Applies a CA to a periodic or finite configuration.
    CaApply {
        #[arg(long)]
        rule: String,
        /// Comma-separated symbols, e.g. 0,0,0,1.
        #[arg(long)]
        config: String,
        /// Period over Z (defaults to the literal's length).
        #[arg(long, conflicts_with = "group")]
        period: Option<usize>,
        /// Finite quotient the configuration lives on, indexed by element.
        #[arg(long)]
        group: Option<String>,
        #[arg(long, default_value_t = 1)]
        steps: usize,
    },
    /// Composes two CA: rule1 after rule2.
    CaCompose {
        #[arg(long)]
        rule1: String,
        #[arg(long)]
        rule2: String,
        /// Drop memory positions the rule ignores.
        #[arg(long)]
        trim: bool,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Recovers a CA from the configuration map of a rule over a finite group.
    CaSynthesize {
        #[arg(long)]
        rule: String,
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 2)]
        max_radius: usize,
        /// Symbol for table entries never witnessed.
        #[arg(long, default_value_t = 0)]
        fill: u8,
        #[arg(long)]
        trim: bool,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Injectivity and surjectivity of a linear CA over a finite group.
    LinDecide {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        group: String,
    },
    /// Kernel of the inverse of a bijective linear CA over a finite group.
    LinInverse {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        group: String,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Confirms that a one-sided inverse over F_p[G] is two-sided.
    StableFinite {
        #[arg(long)]
        group: String,
        #[arg(long)]
        m: PathBuf,
        #[arg(long)]
        l: PathBuf,
        /// `left`: L·M = I is given; `right`: M·L = I is given.
        #[arg(long, value_enum, default_value_t = SideArg::Left)]
        side: SideArg,
    },
    /// Surjectivity of a CA over Z.
    #[command(name = "surj-1d")]
    Surj1d {
        #[arg(long)]
        rule: String,
        /// Also run the periodic oracle up to this period.
        #[arg(long)]
        oracle: Option<usize>,
    },
    /// Injectivity of a CA over Z.
    #[command(name = "inj-1d")]
    Inj1d {
        #[arg(long)]
        rule: String,
        #[arg(long)]
        oracle: Option<usize>,
    },
    /// Radius of the injectivity transfer lemma for a CA on a subshift.
    GromovRadius {
        #[arg(long)]
        rule: String,
        /// `full` or `fix:<group>`.
        #[arg(long, default_value = "full")]
        subshift: String,
    },
    /// Checks injectivity on periodic families whose windows lie in Y.
    TransferCheck {
        #[arg(long)]
        rule: String,
        #[arg(long, default_value = "full")]
        subshift: String,
        #[arg(long, default_value_t = 8)]
        max_period: usize,
        /// Window radius; defaults to the transfer radius.
        #[arg(long)]
        radius: Option<usize>,
    },
    /// Runs the convergence pipeline along finite quotients.
    Converge {
        #[arg(long)]
        rule: String,
        #[arg(long, default_value = "zd:1")]
        limit: String,
        /// Comma-separated group specs.
        #[arg(long, value_delimiter = ',', required = true)]
        groups: Vec<String>,
        #[arg(long, default_value_t = 8)]
        rmax: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(cap) = cli.cap.or_else(limits::cap_from_env) {
        limits::set_cap(cap);
    }
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            if !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err((out, failure)) => {
            print!("{out}");
            let (code, msg) = match failure {
                Failure::Domain(m) => (1, m),
                Failure::Input(m) => (2, m),
                Failure::Cap(m) => (3, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

/// On failure, returns whatever output was produced before it.
fn run(cli: &Cli) -> Result<String, (String, Failure)> {
    let fmt = cli.format;
    dispatch(&cli.command, fmt)
}

fn plain<T>(r: Result<T, Failure>) -> Result<T, (String, Failure)> {
    r.map_err(|f| (String::new(), f))
}

fn render(fmt: Format, table: impl FnOnce() -> String, value: impl FnOnce() -> Value) -> String {
    match fmt {
        Format::Json => serde_json::to_string_pretty(&value()).expect("serializable") + "\n",
        Format::Table | Format::Csv => table(),
    }
}

fn dump(path: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    if let Some(p) = path {
        fs::write(p, text).map_err(|e| Failure::Domain(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn radius_json(r: AgreementRadius) -> Value {
    serde_json::to_value(r).expect("serializable")
}

fn rule_json(ca: &CellularAutomaton) -> Value {
    json!({
        "rank": ca.rank(),
        "alphabet": ca.alphabet(),
        "memory": ca.memory().iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "table": ca.rule().table(),
    })
}

fn kernel_json(k: &LinearKernel) -> Value {
    json!({
        "prime": k.prime(),
        "dim": k.dim(),
        "terms": k.terms().iter().map(|(w, m)| (w.to_string(), json!(m.to_rows()))).collect::<serde_json::Map<_, _>>(),
    })
}

fn read_windows(path: &Path, rank: usize) -> Result<WindowSet, Failure> {
    Ok(WindowSet::from_csv(&input::read(path)?, rank)?)
}

fn join(v: &[u8]) -> String {
    v.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
}

fn dispatch(command: &Command, fmt: Format) -> Result<String, (String, Failure)> {
    match command {
        Command::MarkedDist { group1, group2, rmax } => plain((|| {
            let r = marked_distance(&*input::group(group1)?, &*input::group(group2)?, *rmax)?;
            Ok(render(
                fmt,
                || format!("agreement radius: {r}\n"),
                || json!({ "agreement_radius": radius_json(r), "rmax": rmax }),
            ))
        })()),
        Command::FixWindow {
            group,
            alphabet,
            radius,
            dump: path,
        } => plain((|| {
            let set = fix_window(&*input::group(group)?, *alphabet, *radius)?;
            dump(path, &set.to_csv())?;
            Ok(match fmt {
                Format::Csv => set.to_csv(),
                Format::Table => set.to_table(),
                Format::Json => render(fmt, String::new, || {
                    json!({
                        "rank": set.rank(),
                        "radius": set.radius(),
                        "count": set.len(),
                        "patterns": set.label_vectors().collect::<Vec<_>>(),
                    })
                }),
            })
        })()),
        Command::HbDist {
            group1,
            group2,
            windows1,
            windows2,
            rank,
            alphabet,
            rmax,
        } => plain((|| {
            let r = match (group1, group2, windows1, windows2) {
                (Some(a), Some(b), None, None) => {
                    let y = FixSubshift::new((*input::group(a)?).clone(), *alphabet);
                    let z = FixSubshift::new((*input::group(b)?).clone(), *alphabet);
                    hb_agreement_radius(&y, &z, *rmax)?
                }
                (None, None, Some(a), Some(b)) => {
                    let rank = rank.expect("required by clap");
                    let (ta, tb) = (read_windows(a, rank)?, read_windows(b, rank)?);
                    let top = ta.radius().min(tb.radius()).min(*rmax);
                    let y = ExplicitFamily::from_top(*alphabet, &ta.restrict(top)?)?;
                    let z = ExplicitFamily::from_top(*alphabet, &tb.restrict(top)?)?;
                    hb_agreement_radius(&y, &z, top)?
                }
                _ => {
                    return Err(Failure::Input(
                        "give either --group1 and --group2 or --windows1 and --windows2".into(),
                    ))
                }
            };
            Ok(render(
                fmt,
                || format!("agreement radius: {r}\n"),
                || json!({ "agreement_radius": radius_json(r), "rmax": rmax }),
            ))
        })()),
        Command::CaApply {
            rule,
            config,
            period,
            group,
            steps,
        } => plain((|| {
            let ca = input::rule(rule)?;
            let values = surjunct::shift::parse_symbols(config)?;
            let out = match group {
                Some(g) => {
                    let mut x = FiniteConfiguration::new(input::group(g)?, values)?;
                    for _ in 0..*steps {
                        x = ca.apply_finite(&x)?;
                    }
                    x.values().to_vec()
                }
                None => {
                    if let Some(p) = period {
                        if *p != values.len() {
                            return Err(Failure::Input(format!(
                                "configuration has {} symbols but period is {p}",
                                values.len()
                            )));
                        }
                    }
                    let mut x = PeriodicConfiguration::new(values)?;
                    for _ in 0..*steps {
                        x = ca.apply_periodic(&x)?;
                    }
                    x.values().to_vec()
                }
            };
            Ok(render(fmt, || join(&out) + "\n", || json!({ "output": out })))
        })()),
        Command::CaCompose {
            rule1,
            rule2,
            trim,
            dump: path,
        } => plain((|| {
            let mut c = input::rule(rule1)?.compose(&input::rule(rule2)?)?;
            if *trim {
                c = c.trim();
            }
            dump(path, &write_rule(&c))?;
            Ok(render(fmt, || write_rule(&c), || rule_json(&c)))
        })()),
        Command::CaSynthesize {
            rule,
            group,
            max_radius,
            fill,
            trim,
            dump: path,
        } => plain((|| {
            let ca = input::rule(rule)?;
            let g = input::group(group)?;
            let map = |x: &FiniteConfiguration| ca.apply_finite(x).expect("configuration over the group");
            let bb = BlackBox::Configurations {
                group: g,
                alphabet: ca.alphabet(),
                map: &map,
            };
            let mut out = synthesize_ca(&bb, *max_radius, *fill)?;
            if *trim {
                out = out.trim();
            }
            dump(path, &write_rule(&out))?;
            Ok(render(fmt, || write_rule(&out), || rule_json(&out)))
        })()),
        Command::LinDecide { kernel, group } => plain((|| {
            let k = parse_kernel(&input::read(kernel)?)?;
            let d = lin_decide(&k, &*input::group(group)?)?;
            Ok(render(
                fmt,
                || format!("{d}\ninjective: {}\nsurjective: {}\n", d.injective, d.surjective),
                || serde_json::to_value(d).expect("serializable"),
            ))
        })()),
        Command::LinInverse {
            kernel,
            group,
            dump: path,
        } => plain((|| {
            let k = parse_kernel(&input::read(kernel)?)?;
            let inv = lin_inverse_kernel(&k, &*input::group(group)?)?;
            dump(path, &write_kernel(&inv))?;
            Ok(render(fmt, || write_kernel(&inv), || kernel_json(&inv)))
        })()),
        Command::StableFinite { group, m, l, side } => {
            let verdict = plain((|| {
                let g = input::group(group)?;
                let m = parse_group_algebra_matrix(&input::read(m)?, &g)?;
                let l = parse_group_algebra_matrix(&input::read(l)?, &g)?;
                let side = match side {
                    SideArg::Left => Side::Left,
                    SideArg::Right => Side::Right,
                };
                Ok(stable_finiteness_witness(&m, &l, side)?)
            })())?;
            match verdict {
                StableFiniteness::TwoSidedConfirmed { .. } => Ok(render(
                    fmt,
                    || "verdict: two-sided inverse confirmed\n".into(),
                    || json!({ "verdict": "two_sided_confirmed" }),
                )),
                StableFiniteness::OneSidedOnly {
                    regular_rank,
                    dimension,
                } => Err((
                    render(
                        fmt,
                        || format!("verdict: one-sided only (rank {regular_rank} of {dimension})\n"),
                        || json!({ "verdict": "one_sided_only", "rank": regular_rank, "dimension": dimension }),
                    ),
                    Failure::Domain("inverse is not two-sided".into()),
                )),
            }
        }
        Command::Surj1d { rule, oracle } => plain(one_dim(rule, *oracle, Property::Surjective, fmt)),
        Command::Inj1d { rule, oracle } => plain(one_dim(rule, *oracle, Property::Injective, fmt)),
        Command::GromovRadius { rule, subshift } => plain((|| {
            let ca = input::rule(rule)?;
            let y = input::subshift(subshift, ca.rank(), ca.alphabet())?;
            let p = compute_profile(&ca, y.as_ref())?;
            let v = gromov_radius(&p);
            Ok(render(
                fmt,
                || {
                    format!(
                        "memory radius: {}\nembedding radius: {}\nexpansivity radius: {}\nradius: {v}\n",
                        p.memory_radius, p.embedding_radius, p.expansivity_radius
                    )
                },
                || json!({ "profile": serde_json::to_value(p).expect("serializable"), "radius": v }),
            ))
        })()),
        Command::TransferCheck {
            rule,
            subshift,
            max_period,
            radius,
        } => {
            let report = plain((|| {
                let ca = input::rule(rule)?;
                let y = input::subshift(subshift, ca.rank(), ca.alphabet())?;
                let v = match radius {
                    Some(v) => *v,
                    None => gromov_radius(&compute_profile(&ca, y.as_ref())?),
                };
                Ok(injectivity_transfer_check(&ca, y.as_ref(), v, *max_period)?)
            })())?;
            let out = render(fmt, || format!("{report}\n"), || report.to_json());
            if report.passed() {
                Ok(out)
            } else {
                let n = report.counterexamples;
                Err((out, Failure::Domain(format!("{n} contained families are not injective"))))
            }
        }
        Command::Converge {
            rule,
            limit,
            groups,
            rmax,
        } => plain((|| {
            let ca = input::rule(rule)?;
            let limit = input::group(limit)?;
            let groups: Vec<Arc<_>> = groups.iter().map(|g| input::group(g)).collect::<Result<_, _>>()?;
            let report = convergence_experiment(&groups, &limit, &ca, *rmax)?;
            Ok(render(fmt, || format!("{report}\n"), || report.to_json()))
        })()),
    }
}

fn one_dim(rule: &str, oracle: Option<usize>, property: Property, fmt: Format) -> Result<String, Failure> {
    let ca = input::rule(rule)?;
    let (name, verdict) = match property {
        Property::Surjective => ("surjective", is_surjective_1d(&ca)?),
        Property::Injective => ("injective", is_injective_1d(&ca)?),
    };
    let oracle = oracle.map(|p| periodic_oracle(&ca, property, p).map(|o| (p, o))).transpose()?;
    Ok(render(
        fmt,
        || {
            let mut s = format!("{name}: {verdict}\n");
            if let Some((p, o)) = oracle {
                let _ = writeln!(s, "periodic oracle (period <= {p}): {o}");
            }
            s
        },
        || {
            let mut v = json!({ name: verdict });
            if let Some((p, o)) = oracle {
                v["oracle"] = json!({ "max_period": p, "verdict": o });
            }
            v
        },
    ))
}
