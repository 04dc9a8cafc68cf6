use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use symgrand::grand::{BitLevelPatterns, PatternSource, SymbolLevelPatterns};
use symgrand::harness::{
    emit_results, parse_values, run_simulation, validate_structures, validation_csv,
    DecoderChoice, GridSpec, OutputFormat, SimConfig, ValidationConfig,
};
use symgrand::likelihood::{build_structure_table, ordered_structures};
use symgrand::{BitWord, Constellation, Error, FadingModel, LinearCode, Result};

#[derive(Parser)]
#[command(name = "symgrand", version, about = "Bit-level and symbol-level GRAND over M-QAM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternKind {
    Bit,
    Symbol,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BLER and complexity sweep.
    Simulate {
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 103)]
        k: usize,
        #[arg(long = "mod", default_value_t = 16)]
        order: usize,
        #[arg(long, default_value = "awgn")]
        channel: FadingModel,
        #[arg(long, default_value = "both")]
        decoder: DecoderChoice,
        #[arg(long, default_value_t = 2)]
        wth: usize,
        /// `start:step:stop` or a comma separated list, in dB.
        #[arg(long, default_value = "10")]
        ebn0: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        code_seed: u64,
        #[arg(long, default_value_t = 100)]
        min_errors: u64,
        /// Zero disables the block limit.
        #[arg(long, default_value_t = 1_000_000)]
        max_blocks: u64,
        /// Structures kept per table row; 0 keeps all.
        #[arg(long, default_value_t = 5)]
        top: usize,
        /// Effective-SNR grid of the lookup table, `start:step:stop` in dB.
        #[arg(long, default_value = "0:0.25:33")]
        grid: GridSpec,
        /// Skip the code (requires k = n) and count raw detection errors.
        #[arg(long)]
        uncoded: bool,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Emit the ordered structure lookup table.
    Table {
        #[arg(long = "L", default_value_t = 32)]
        l: usize,
        #[arg(long = "mod", default_value_t = 16)]
        order: usize,
        #[arg(long, default_value = "0:0.25:33")]
        grid: GridSpec,
        #[arg(long)]
        wth: Option<usize>,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare realized error structures of uncoded AWGN blocks with theory.
    ValidateProb {
        #[arg(long = "mod", default_value_t = 16)]
        order: usize,
        #[arg(long = "L", default_value_t = 32)]
        l: usize,
        #[arg(long, default_value = "6,8,10,12")]
        ebn0: String,
        #[arg(long, default_value_t = 1_000_000)]
        blocks: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print labels, coordinates, classes and neighbourhoods.
    DumpConstellation {
        #[arg(long = "mod", default_value_t = 16)]
        order: usize,
        #[arg(long, default_value_t = 1.0)]
        es: f64,
    },
    /// Print the first error patterns of a pattern source, one hex word per line.
    DumpPatterns {
        #[arg(long)]
        decoder: PatternKind,
        /// Pattern length; taken from `--y` when given.
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        wth: usize,
        /// Hard-detected word as a bit string, first bit first.
        #[arg(long)]
        y: Option<String>,
        #[arg(long = "mod", default_value_t = 16)]
        order: usize,
        /// Effective SNR selecting the structure order, in dB.
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Write the generator and parity-check matrices of a random linear code.
    ExportCode {
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 103)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            n,
            k,
            order,
            channel,
            decoder,
            wth,
            ebn0,
            seed,
            code_seed,
            min_errors,
            max_blocks,
            top,
            grid,
            uncoded,
            workers,
            out,
            format,
        } => {
            let config = SimConfig {
                n,
                k,
                order,
                channel,
                decoder,
                w_th: wth,
                ebn0_db: parse_values(&ebn0)?,
                seed,
                code_seed,
                min_block_errors: min_errors,
                max_blocks,
                table_grid: grid,
                top_v: (top > 0).then_some(top),
                uncoded,
            };
            let results = run_simulation(&config, workers)?;
            emit_results(&results, format, &out)?;
            for p in &results.points {
                eprintln!(
                    "{:>6} dB {:>8}: blocks={} errors={} bler={:.3e} avg_tests={:.2}",
                    p.ebn0_db, p.decoder, p.blocks, p.block_errors, p.bler, p.avg_tests
                );
            }
        }
        Command::Table {
            l,
            order,
            grid,
            wth,
            top,
            out,
        } => {
            let table = build_structure_table(l, order, &grid.values()?, wth, top)?;
            write_or_print(out.as_ref(), &table.to_text())?;
        }
        Command::ValidateProb {
            order,
            l,
            ebn0,
            blocks,
            seed,
            workers,
            out,
        } => {
            let config = ValidationConfig {
                order,
                l,
                ebn0_db: parse_values(&ebn0)?,
                blocks,
                seed,
            };
            let report = validate_structures(&config, workers)?;
            write_or_print(out.as_ref(), &validation_csv(&report)?)?;
        }
        Command::DumpConstellation { order, es } => {
            print!("{}", Constellation::new(order, es)?.dump());
        }
        Command::DumpPatterns {
            decoder,
            n,
            wth,
            y,
            order,
            snr_db,
            top,
            count,
        } => {
            let y = match y {
                Some(s) => s.parse::<BitWord>()?,
                None => BitWord::zeros(n),
            };
            let patterns = match decoder {
                PatternKind::Bit => BitLevelPatterns::new(y.len(), wth)?.first_patterns(count),
                PatternKind::Symbol => {
                    let c = Constellation::new(order, 1.0)?;
                    if y.len() % c.bits_per_symbol() != 0 {
                        return Err(Error::NotSymbolAligned {
                            len: y.len(),
                            bits_per_symbol: c.bits_per_symbol(),
                        });
                    }
                    let l = y.len() / c.bits_per_symbol();
                    let row = ordered_structures(l, order, snr_db, Some(wth), top)?;
                    SymbolLevelPatterns::new(&y, &row, &c)?.first_patterns(count)
                }
            };
            let mut out = String::new();
            for p in patterns {
                out.push_str(&p.to_hex());
                out.push('\n');
            }
            print!("{out}");
        }
        Command::ExportCode { n, k, seed, out_dir } => {
            let code = LinearCode::random(n, k, seed)?;
            fs::create_dir_all(&out_dir)?;
            fs::write(out_dir.join("G.txt"), code.generator().to_text())?;
            fs::write(out_dir.join("H.txt"), code.parity_check().to_text())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
