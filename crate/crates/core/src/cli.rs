//! Command-line front end. Owns all file and stream I/O.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::scenario::{
    builtin, einstein_scenario, equilibria_scenario, list_catalog, run_scenario, Expectation,
    OutputFormat, Overrides, RunError, Scenario,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_REJECTED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "rayreduce",
    version,
    about = "Ray reduction of conformal Hamiltonian systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file or a built-in scenario by name.
    Run {
        scenario: String,
        #[command(flatten)]
        common: Common,
    },
    /// List built-in scenarios and model keys.
    List,
    /// Search for relative equilibria of a catalog system.
    Equilibria {
        system: String,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        mu: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Decide whether the wedge norm is constant on a sphere's ray level set.
    EinsteinCheck {
        sphere: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExpectArg {
    Constant,
    NonConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, env = "RAYREDUCE_OUT_DIR", default_value = "rayreduce-out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long, value_enum)]
    expect: Option<ExpectArg>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            dt: self.dt,
            t_final: self.t_final,
            samples: self.samples,
            expect: self.expect.map(|e| match e {
                ExpectArg::Constant => Expectation::Constant,
                ExpectArg::NonConstant => Expectation::NonConstant,
            }),
        }
    }

    fn format(&self) -> OutputFormat {
        match self.format {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

struct Failure {
    code: &'static str,
    message: String,
    context: Value,
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let context = match &e {
            RunError::Parse { line, column, .. } => json!({"line": line, "column": column}),
            RunError::Domain { module, .. } => json!({"module": module}),
            RunError::Invalid(_) => Value::Null,
        };
        Failure {
            code: e.code(),
            message: e.to_string(),
            context,
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: "io_error",
        message: e.to_string(),
        context: json!({"path": path.display().to_string()}),
    }
}

fn load(spec: &str) -> Result<Scenario, Failure> {
    if let Some(s) = builtin(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: "parse_error",
        message: format!("cannot read scenario: {e}"),
        context: json!({"path": spec}),
    })?;
    Scenario::parse(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.context["path"] = json!(spec);
        f
    })
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_failure(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| io_failure(&target, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| io_failure(&target, e))?;
    }
    tmp.persist(&target)
        .map_err(|e| io_failure(&target, e.error))?;
    Ok(())
}

fn execute(mut scenario: Scenario, common: &Common, out: &mut dyn Write) -> Result<i32, Failure> {
    scenario.apply(&common.overrides())?;
    let result = run_scenario(&scenario, common.format())?;
    std::fs::create_dir_all(&common.out_dir).map_err(|e| io_failure(&common.out_dir, e))?;
    for (name, contents) in &result.files {
        write_atomic(&common.out_dir, name, contents)?;
    }
    let mut report = result.report.clone();
    if let Some(reason) = &result.rejection {
        report["rejected"] = json!(reason);
    }
    let line = report.to_string();
    write_atomic(
        &common.out_dir,
        &format!("{}.report.json", scenario.name),
        &(line.clone() + "\n"),
    )?;
    writeln!(out, "{line}").map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    Ok(if result.rejection.is_some() {
        EXIT_REJECTED
    } else {
        EXIT_OK
    })
}

/// Runs the command line `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let record = json!({"code": "usage_error", "message": e.kind().to_string(), "context": {"detail": e.to_string()}});
            let _ = writeln!(err, "{record}");
            return EXIT_FAILURE;
        }
    };
    let result = match cli.command {
        Command::List => {
            let _ = write!(out, "{}", list_catalog());
            Ok(EXIT_OK)
        }
        Command::Run { scenario, common } => load(&scenario).and_then(|s| execute(s, &common, out)),
        Command::Equilibria { system, mu, common } => {
            execute(equilibria_scenario(&system, mu), &common, out)
        }
        Command::EinsteinCheck { sphere, mu, common } => {
            execute(einstein_scenario(&sphere, mu), &common, out)
        }
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let record = json!({"code": f.code, "message": f.message, "context": f.context});
            let _ = writeln!(err, "{record}");
            EXIT_FAILURE
        }
    }
}
