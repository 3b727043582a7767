//! Command-line front end.  `run` is pure: it takes the arguments and standard input and
//! returns the exit code with both output streams, so the binary is a thin wrapper.
//!
//! Exit codes: 0 on success or a true answer, 1 on a mathematical negative (not liftable,
//! not exact, failed condition, failed verification), 2 on usage and input errors.

use std::path::Path;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as JsonValue};

use crate::crux::check_crux;
use crate::error::Error;
use crate::forms::{euler, invert_dh_1d, HorizontalForm};
use crate::jet::LocalFunction;
use crate::json::{from_json, to_json, Document};
use crate::ldo::Ldo;
use crate::lifting::{
    a0, is_liftable, lift, lift_null, solve_delta, DEndElement, SignConvention,
};
use crate::opcomplex::{reduce_top, solve_d, OperatorForm};
use crate::random::SEED_ENV;
use crate::shlie::{
    build_tower, check_poisson_conditions, jacobiator, skew_symmetrize, verification_shape, verify_shlie,
    ShLieTower, VerifyReport,
};
use crate::syntax::{parse_form, parse_function, parse_ldo, parse_operator_form, Context};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Regraded,
    Classical,
}

impl From<SignArg> for SignConvention {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Regraded => SignConvention::Regraded,
            SignArg::Classical => SignConvention::Classical,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "jetlift", version, about = "Exact computations with local differential operators on jet spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Number of independent variables N.
    #[arg(long, global = true, default_value_t = 1)]
    pub dim: usize,
    /// Arity n of operators read as text.
    #[arg(long, global = true, default_value_t = 1)]
    pub arity: usize,
    /// Arity of the inner operators of `compose` read as text.
    #[arg(long, global = true, default_value_t = 1)]
    pub inner_arity: usize,
    /// Truncate operator inputs to vertical letters of order at most B.
    #[arg(long, global = true)]
    pub order_bound: Option<i64>,
    /// Seed for randomized verification.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Number of random trials for verification.
    #[arg(long, global = true, default_value_t = 25)]
    pub trials: usize,
    /// Output format; documents without a text syntax default to JSON.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Largest bracket arity for `shlie-build`.
    #[arg(long, global = true, default_value_t = 3)]
    pub kmax: usize,
    /// Largest arity checked by `shlie-verify` (default: the tower's).
    #[arg(long, global = true)]
    pub nmax: Option<usize>,
    /// Axis for `theta` (1-based).
    #[arg(long, global = true, default_value_t = 1)]
    pub axis: usize,
    /// Slot for `theta` (1-based).
    #[arg(long, global = true, default_value_t = 1)]
    pub slot: usize,
    /// Form degree of text inputs that are zero.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Koszul sign convention for elements built by `lift`.
    #[arg(long, global = true, value_enum, default_value_t = SignArg::Regraded)]
    pub sign: SignArg,
    /// Print operators in polarized form.
    #[arg(long, global = true)]
    pub polarized: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Apply an operator to functions: OP F1 .. Fn.
    Apply {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Operadic composition: OUTER INNER1 .. INNERn.
    Compose {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Characteristic χ(A).
    Char {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Formal adjoint of a unary horizontal operator.
    Adjoint {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Θ^axis_slot A.
    Theta {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Check the relations satisfied by χ(A).
    CruxCheck {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Horizontal differential of a form.
    Dh {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Euler operator of a top form.
    Euler {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Primitive of an exact 1-form on the line.
    InvertDh {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Differential of the operator complex.
    Dop {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Split a top operator as d_op(Ã) + χ(A).
    ReduceTop {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Solve d_op X = Y for a closed Y.
    SolveD {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// The lifting obstruction a₀(A).
    A0 {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Decide liftability (exit 1 when not liftable).
    Liftable {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Lift an operator to a degree-0 cycle.
    Lift {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
        /// Use the short lift δh available when χ(A) = 0.
        #[arg(long)]
        null: bool,
    },
    /// Differential δ of an element.
    Delta {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Solve δh = g for a cycle g.
    SolveDelta {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Check the three conditions on a bilinear bracket.
    PoissonCheck {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Skew-symmetrize a bilinear bracket modulo d_H.
    Skew {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Jacobiator of l₂ (an element, or a bracket to be lifted first).
    Jacobiator {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Build and verify an sh-Lie tower from a bilinear bracket.
    ShlieBuild {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Verify the generalized Jacobi identities of a tower.
    ShlieVerify {
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
}

/// Result of one invocation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Usage(String),
    Negative(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotLiftable { .. }
            | Error::NotExact(_)
            | Error::NotClosed(_)
            | Error::NoSolution(_)
            | Error::Condition(_)
            | Error::Truncation(_)
            | Error::Inconsistent(_) => Failure::Negative(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<Outcome, Failure>;

/// Runs the command line `args` (including the program name).
pub fn run<I, S>(args: I, stdin: &mut dyn FnMut() -> std::io::Result<String>) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match execute(&cli, stdin) {
        Ok(o) => o,
        Err(Failure::Usage(m)) => Outcome { code: 2, stdout: String::new(), stderr: format!("error: {m}\n") },
        Err(Failure::Negative(m)) => Outcome { code: 1, stdout: String::new(), stderr: format!("{m}\n") },
    }
}

struct Io<'a> {
    cli: &'a Cli,
    stdin: &'a mut dyn FnMut() -> std::io::Result<String>,
    stdin_used: bool,
}

impl Io<'_> {
    fn context(&self) -> Context {
        Context { dim: self.cli.dim, arity: self.cli.arity, polarized: false }
    }

    /// Reads an input: `-` or a missing argument is stdin, an existing path is a file,
    /// anything else is the expression itself.
    fn text(&mut self, arg: Option<&String>) -> std::result::Result<String, Failure> {
        match arg.map(|s| s.as_str()) {
            None | Some("-") => {
                if self.stdin_used {
                    return Err(Failure::Usage("standard input can only be read once".into()));
                }
                self.stdin_used = true;
                (self.stdin)().map_err(|e| Failure::Usage(format!("cannot read standard input: {e}")))
            }
            Some(s) if Path::new(s).is_file() => {
                std::fs::read_to_string(s).map_err(|e| Failure::Usage(format!("cannot read {s}: {e}")))
            }
            Some(s) => Ok(s.to_string()),
        }
    }

    fn bound_ldo(&self, a: Ldo) -> Ldo {
        match self.cli.order_bound {
            Some(b) => a.truncate(b),
            None => a,
        }
    }

    fn bound_oform(&self, f: OperatorForm) -> OperatorForm {
        match self.cli.order_bound {
            Some(b) => f.truncate(b),
            None => f,
        }
    }

    fn ldo_with(&mut self, arg: Option<&String>, ctx: Context) -> std::result::Result<Ldo, Failure> {
        let t = self.text(arg)?;
        let a = if is_json(&t) {
            match from_json(&t)? {
                Document::Ldo(a) => a,
                Document::OperatorForm(f) if f.degree() == f.dim() => f.top_component()?,
                d => return Err(wrong_kind("an operator", &d)),
            }
        } else {
            parse_ldo(&t, &ctx)?
        };
        Ok(self.bound_ldo(a))
    }

    fn ldo(&mut self, arg: Option<&String>) -> std::result::Result<Ldo, Failure> {
        let ctx = self.context();
        self.ldo_with(arg, ctx)
    }

    fn function(&mut self, arg: Option<&String>) -> std::result::Result<LocalFunction, Failure> {
        let t = self.text(arg)?;
        if is_json(&t) {
            return match from_json(&t)? {
                Document::Function(f) => Ok(f),
                d => Err(wrong_kind("a function", &d)),
            };
        }
        Ok(parse_function(&t, self.cli.dim)?)
    }

    fn form(&mut self, arg: Option<&String>) -> std::result::Result<HorizontalForm, Failure> {
        let t = self.text(arg)?;
        if is_json(&t) {
            return match from_json(&t)? {
                Document::Form(w) => Ok(w),
                Document::Function(f) => Ok(HorizontalForm::function(f)),
                d => Err(wrong_kind("a form", &d)),
            };
        }
        Ok(parse_form(&t, self.cli.dim, self.cli.degree)?)
    }

    fn oform(&mut self, arg: Option<&String>) -> std::result::Result<OperatorForm, Failure> {
        let t = self.text(arg)?;
        let f = if is_json(&t) {
            match from_json(&t)? {
                Document::OperatorForm(f) => f,
                Document::Ldo(a) => OperatorForm::top(&a),
                d => return Err(wrong_kind("an operator form", &d)),
            }
        } else {
            parse_operator_form(&t, &self.context(), self.cli.degree)?
        };
        Ok(self.bound_oform(f))
    }

    fn dend(&mut self, arg: Option<&String>) -> std::result::Result<DEndElement, Failure> {
        let t = self.text(arg)?;
        if !is_json(&t) {
            return Err(Failure::Usage("graded endomorphisms are read from JSON documents".into()));
        }
        match from_json(&t)? {
            Document::DEnd(f) => Ok(f),
            d => Err(wrong_kind("a graded endomorphism", &d)),
        }
    }

    fn tower(&mut self, arg: Option<&String>) -> std::result::Result<ShLieTower, Failure> {
        let t = self.text(arg)?;
        if !is_json(&t) {
            return Err(Failure::Usage("towers are read from JSON documents".into()));
        }
        match from_json(&t)? {
            Document::Tower(t) => Ok(t),
            d => Err(wrong_kind("a tower", &d)),
        }
    }

    fn format_for(&self, doc: &Document) -> Format {
        self.cli.format.unwrap_or(match doc {
            Document::DEnd(_) | Document::Tower(_) => Format::Json,
            _ => Format::Text,
        })
    }

    fn show_ldo(&self, a: Ldo) -> Document {
        Document::Ldo(if self.cli.polarized { a.to_polarized() } else { a })
    }

    fn render(&self, doc: &Document) -> String {
        match self.format_for(doc) {
            Format::Json => to_json(doc),
            Format::Text => format!("{}\n", text_of(doc)),
        }
    }

    fn json(&self) -> bool {
        self.cli.format == Some(Format::Json)
    }
}

fn is_json(t: &str) -> bool {
    t.trim_start().starts_with('{')
}

fn wrong_kind(expected: &str, d: &Document) -> Failure {
    Failure::Usage(format!("expected {expected}, found a {} document", d.kind()))
}

fn text_of(doc: &Document) -> String {
    match doc {
        Document::Function(f) => f.to_string(),
        Document::Ldo(a) => a.to_string(),
        Document::Form(w) => w.to_string(),
        Document::OperatorForm(f) => f.to_string(),
        Document::DEnd(f) => dend_text(f),
        Document::Tower(t) => {
            let parts: Vec<String> =
                t.brackets.iter().map(|(k, l)| format!("l_{k}:\n{}", indent(&dend_text(l)))).collect();
            parts.join("\n")
        }
    }
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("  {l}")).collect::<Vec<_>>().join("\n")
}

fn dend_text(f: &DEndElement) -> String {
    let mut lines = vec![format!(
        "degree {}, arity {}, N = {}, {:?} signs",
        f.degree(),
        f.arity(),
        f.dim(),
        f.sign_convention()
    )];
    for (eps, form) in f.families() {
        let slots: Vec<String> = eps
            .iter()
            .map(|e| {
                if e.is_empty() {
                    "1".to_string()
                } else {
                    let idx: Vec<String> = e.iter().map(|i| (i + 1).to_string()).collect();
                    format!("dx[{}]", idx.join(","))
                }
            })
            .collect();
        lines.push(format!("s = {}, ({}): {}", f.s_of(eps), slots.join(", "), form));
    }
    lines.join("\n")
}

fn doc_value(doc: &Document) -> JsonValue {
    serde_json::from_str(&to_json(doc)).expect("valid JSON")
}

fn json_out(v: JsonValue) -> String {
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

fn ok(stdout: String) -> CmdResult {
    Ok(Outcome { code: 0, stdout, stderr: String::new() })
}

fn verdict(stdout: String, pass: bool) -> CmdResult {
    Ok(Outcome { code: if pass { 0 } else { 1 }, stdout, stderr: String::new() })
}

fn report_json(r: &VerifyReport) -> JsonValue {
    json!({
        "passed": r.passed(),
        "arities": r.arities.iter().map(|a| json!({
            "n": a.n,
            "trials": a.trials,
            "failures": a.failures,
        })).collect::<Vec<_>>(),
    })
}

fn execute(cli: &Cli, stdin: &mut dyn FnMut() -> std::io::Result<String>) -> CmdResult {
    let mut io = Io { cli, stdin, stdin_used: false };
    match &cli.command {
        Command::Apply { inputs } => {
            let first = inputs.first();
            let t = io.text(first)?;
            let args_from = 1;
            if is_json(&t) {
                if let Document::OperatorForm(f) = from_json(&t)? {
                    let args = functions(&mut io, &inputs[args_from..], f.arity())?;
                    return ok(io.render(&Document::Form(f.apply(&args)?)));
                }
            }
            let a = if is_json(&t) {
                match from_json(&t)? {
                    Document::Ldo(a) => a,
                    d => return Err(wrong_kind("an operator", &d)),
                }
            } else {
                parse_ldo(&t, &io.context())?
            };
            let a = io.bound_ldo(a);
            let args = functions(&mut io, inputs.get(args_from..).unwrap_or(&[]), a.arity())?;
            ok(io.render(&Document::Function(a.apply(&args)?)))
        }
        Command::Compose { inputs } => {
            let outer = io.ldo(inputs.first())?.to_unpolarized();
            if inputs.len() != outer.arity() + 1 {
                return Err(Failure::Usage(format!(
                    "compose needs {} inner operators, got {}",
                    outer.arity(),
                    inputs.len().saturating_sub(1)
                )));
            }
            let ctx = Context { dim: cli.dim, arity: cli.inner_arity, polarized: false };
            let mut inner = Vec::new();
            for arg in &inputs[1..] {
                inner.push(io.ldo_with(Some(arg), ctx)?.to_unpolarized());
            }
            let c = outer.compose(&inner)?;
            ok(io.render(&io.show_ldo(c)))
        }
        Command::Char { inputs } => {
            let a = io.ldo(inputs.first())?;
            ok(io.render(&io.show_ldo(a.characteristic())))
        }
        Command::Adjoint { inputs } => {
            let a = io.ldo(inputs.first())?;
            ok(io.render(&io.show_ldo(a.adjoint()?)))
        }
        Command::Theta { inputs } => {
            let a = io.ldo(inputs.first())?;
            let (axis, slot) = one_based(cli.axis, cli.slot)?;
            ok(io.render(&io.show_ldo(a.theta(axis, slot)?)))
        }
        Command::CruxCheck { inputs } => {
            let a = io.ldo(inputs.first())?;
            let r = check_crux(&a)?;
            let out = if io.json() {
                json_out(json!({
                    "all": r.all_true(),
                    "axes": r.axes.iter().map(|x| json!({
                        "axis": x.axis + 1,
                        "sum_relation": x.sum_relation,
                        "slot_relations": x.slot_relations,
                    })).collect::<Vec<_>>(),
                }))
            } else {
                let mut s = String::new();
                for x in &r.axes {
                    let slots: Vec<String> = x.slot_relations.iter().map(|b| b.to_string()).collect();
                    s.push_str(&format!(
                        "axis {}: sum relation {}, slot relations [{}]\n",
                        x.axis + 1,
                        x.sum_relation,
                        slots.join(", ")
                    ));
                }
                s
            };
            verdict(out, r.all_true())
        }
        Command::Dh { inputs } => {
            let w = io.form(inputs.first())?;
            ok(io.render(&Document::Form(w.dh())))
        }
        Command::Euler { inputs } => {
            let w = io.form(inputs.first())?;
            ok(io.render(&Document::Function(euler(&w)?)))
        }
        Command::InvertDh { inputs } => {
            let w = io.form(inputs.first())?;
            ok(io.render(&Document::Form(invert_dh_1d(&w)?)))
        }
        Command::Dop { inputs } => {
            let f = io.oform(inputs.first())?;
            ok(io.render(&Document::OperatorForm(f.d_op())))
        }
        Command::ReduceTop { inputs } => {
            let f = io.oform(inputs.first())?;
            let r = reduce_top(&f)?;
            let tilde = Document::OperatorForm(r.tilde);
            let chi = io.show_ldo(r.chi.top_component()?.to_unpolarized());
            if io.json() {
                ok(json_out(json!({ "tilde": doc_value(&tilde), "chi": doc_value(&chi) })))
            } else {
                ok(format!("tilde = {}\nchi = {}\n", text_of(&tilde), text_of(&chi)))
            }
        }
        Command::SolveD { inputs } => {
            let y = io.oform(inputs.first())?;
            ok(io.render(&Document::OperatorForm(solve_d(&y)?)))
        }
        Command::A0 { inputs } => {
            let a = io.ldo(inputs.first())?;
            let m = a0(&a)?;
            if io.json() {
                let mut entries = Vec::new();
                for (i, row) in m.iter().enumerate() {
                    for (j, c) in row.iter().enumerate() {
                        entries.push(json!({ "axis": i + 1, "slot": j + 1, "chi": doc_value(&Document::Ldo(c.clone())) }));
                    }
                }
                ok(json_out(json!({ "entries": entries })))
            } else {
                let mut s = String::new();
                for (i, row) in m.iter().enumerate() {
                    for (j, c) in row.iter().enumerate() {
                        s.push_str(&format!("a0[{},{}] = {}\n", i + 1, j + 1, c));
                    }
                }
                ok(s)
            }
        }
        Command::Liftable { inputs } => {
            let a = io.ldo(inputs.first())?;
            let chi = a.characteristic().to_unpolarized();
            let yes = is_liftable(&a)?;
            let out = if io.json() {
                json_out(json!({ "liftable": yes, "chi": doc_value(&Document::Ldo(chi)) }))
            } else {
                format!("χ = {chi}\nliftable: {yes}\n")
            };
            verdict(out, yes)
        }
        Command::Lift { inputs, null } => {
            let a = io.ldo(inputs.first())?;
            let f = if *null { lift_null(&a, cli.sign.into())? } else { lift(&a, cli.sign.into())? };
            ok(io.render(&Document::DEnd(f)))
        }
        Command::Delta { inputs } => {
            let f = io.dend(inputs.first())?;
            ok(io.render(&Document::DEnd(f.delta()?)))
        }
        Command::SolveDelta { inputs } => {
            let g = io.dend(inputs.first())?;
            ok(io.render(&Document::DEnd(solve_delta(&g)?)))
        }
        Command::PoissonCheck { inputs } => {
            let lt2 = bracket(&mut io, inputs.first())?;
            let r = check_poisson_conditions(&lt2)?;
            let out = if io.json() {
                json_out(json!({ "i": r.i, "ii": r.ii, "iii": r.iii }))
            } else {
                format!("(i) {}\n(ii) {}\n(iii) {}\n", r.i, r.ii, r.iii)
            };
            verdict(out, r.all())
        }
        Command::Skew { inputs } => {
            let lt2 = bracket(&mut io, inputs.first())?;
            ok(io.render(&Document::OperatorForm(skew_symmetrize(&lt2)?)))
        }
        Command::Jacobiator { inputs } => {
            let t = io.text(inputs.first())?;
            let l2 = match is_json(&t).then(|| from_json(&t)).transpose()? {
                Some(Document::DEnd(l2)) => l2,
                _ => {
                    let lt2 = bracket_from_text(&io, &t)?;
                    let skew = skew_symmetrize(&lt2)?;
                    lift(&skew.top_component()?, SignConvention::Regraded)?.alternate()?
                }
            };
            ok(io.render(&Document::DEnd(jacobiator(&l2)?)))
        }
        Command::ShlieBuild { inputs } => {
            let lt2 = bracket(&mut io, inputs.first())?;
            let tower = build_tower(&lt2, cli.kmax)?;
            let report = verify_shlie(&tower, cli.kmax, cli.trials, cli.seed, &verification_shape());
            let stdout = io.render(&Document::Tower(tower));
            Ok(Outcome { code: if report.passed() { 0 } else { 1 }, stdout, stderr: report.to_string() })
        }
        Command::ShlieVerify { inputs } => {
            let tower = io.tower(inputs.first())?;
            let nmax = cli.nmax.unwrap_or(tower.kmax().max(2));
            let report = verify_shlie(&tower, nmax, cli.trials, cli.seed, &verification_shape());
            let out = if io.json() { json_out(report_json(&report)) } else { report.to_string() };
            verdict(out, report.passed())
        }
    }
}

fn one_based(axis: usize, slot: usize) -> std::result::Result<(usize, usize), Failure> {
    if axis == 0 || slot == 0 {
        return Err(Failure::Usage("axes and slots are 1-based".into()));
    }
    Ok((axis - 1, slot - 1))
}

fn functions(io: &mut Io<'_>, args: &[String], arity: usize) -> std::result::Result<Vec<LocalFunction>, Failure> {
    if args.len() != arity {
        return Err(Failure::Usage(format!("expected {arity} function arguments, got {}", args.len())));
    }
    args.iter().map(|a| io.function(Some(a))).collect()
}

/// A bilinear bracket: an operator form of degree N and arity 2, or its top operator.
fn bracket(io: &mut Io<'_>, arg: Option<&String>) -> std::result::Result<OperatorForm, Failure> {
    let t = io.text(arg)?;
    bracket_from_text(io, &t)
}

fn bracket_from_text(io: &Io<'_>, t: &str) -> std::result::Result<OperatorForm, Failure> {
    let f = if is_json(t) {
        match from_json(t)? {
            Document::OperatorForm(f) => f,
            Document::Ldo(a) => OperatorForm::top(&a),
            d => return Err(wrong_kind("a bilinear bracket", &d)),
        }
    } else {
        let ctx = Context { dim: io.cli.dim, arity: 2, polarized: false };
        if t.contains("dx[") {
            parse_operator_form(t, &ctx, Some(io.cli.dim))?
        } else {
            OperatorForm::top(&parse_ldo(t, &ctx)?)
        }
    };
    Ok(io.bound_oform(f))
}

/// Runs with the process arguments and standard input, printing the streams.
pub fn main_with_env() -> i32 {
    let mut read = || {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map(|_| s)
    };
    let out = run(std::env::args_os(), &mut read);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}
