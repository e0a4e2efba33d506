use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ris_dcc::diffraction::{build_generator, read_generator_csv, Normalization};
use ris_dcc::geometry::{preset_repetition_42, preset_systematic_42, read_geometry, CarrierSpec};
use ris_dcc::optimizer::{objective, SearchSpace};
use ris_dcc::modem::ModulationScheme;
use statrs::function::erf::erfc;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-dcc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const REPETITION: &str = "seed = 11\n[geometry]\npreset = \"repetition_42\"\na = 0.4\nh = 0.2\ndz = 10\n";
const SYSTEMATIC: &str = "seed = 11\n[geometry]\npreset = \"systematic_42\"\nd = 0.4\ndz = 12\n";

fn lambda() -> f64 {
    CarrierSpec::new(25e9).unwrap().wavelength_m()
}

#[test]
fn validate_accepts_preset() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", SYSTEMATIC);
    let o = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ok"));
}

#[test]
fn validate_flags_tight_spacing() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "[geometry]\npreset = \"systematic_42\"\nd = 0.05\ndz = 12\n");
    let o = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("spacing_below_min"), "{}", stderr(&o));
}

#[test]
fn validate_reads_geometry_files() {
    let dir = TempDir::new().unwrap();
    let l = lambda();
    let stack = preset_systematic_42(CarrierSpec::new(25e9).unwrap(), 0.4 * l, 12.0 * l).unwrap();
    let bad = stack.map_positions(|layer, i, mut p| {
        if layer == 1 && i == 1 {
            p.x = p.x - 0.4 * l + 0.05 * l;
        }
        p
    });
    let geo = write(dir.path(), "g.txt", &ris_dcc::geometry::geometry_to_string(&bad.unwrap()));
    let o = run(&["validate", "--set", &format!("geometry.file=\"{}\"", s(&geo))]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("spacing_below_min"));
}

#[test]
fn missing_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "[geometry]\nd = 0.4\n");
    let o = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("geometry.preset"), "{}", stderr(&o));

    let cfg = write(dir.path(), "b.toml", "seed = 1\n[code]\nkind = \"uncoded\"\n[snr]\nstop_db = 4\n");
    let o = run(&["ber", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("snr.start_db"), "{}", stderr(&o));

    let o = run(&["ber", "--config", s(&cfg), "--set", "snr.start_db=0", "--set", "code.kind=nonsense"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("code.kind"));
}

#[test]
fn gen_matrix_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", REPETITION);
    let out = dir.path().join("g.csv");
    let o = run(&["gen-matrix", "--config", s(&cfg), "--output", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    // Header plus one line per entry of the 4 × 2 matrix.
    assert_eq!(text.lines().count(), 1 + 4 * 2);

    let parsed = read_generator_csv(text.as_bytes()).unwrap();
    let l = lambda();
    let stack = preset_repetition_42(CarrierSpec::new(25e9).unwrap(), 0.4 * l, 0.2 * l, 10.0 * l).unwrap();
    let want = build_generator(&stack, Normalization::UnitFrobenius, 0.0).unwrap();
    assert_eq!(parsed.rows(), 4);
    for (a, b) in parsed.entries().iter().zip(want.entries().iter()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }

    let mut pairs: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (f[2].to_string(), f[3].to_string())
        })
        .collect();
    pairs.sort();
    pairs.dedup();
    assert_eq!(pairs.len(), 2);
}

fn spectrum_rows(text: &str) -> Vec<f64> {
    text.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn distance_of_doubled_identity() {
    let dir = TempDir::new().unwrap();
    let rows = [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
    let mut csv = "row,col,re,im\n".to_string();
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            csv.push_str(&format!("{i},{j},{v},0\n"));
        }
    }
    let m = write(dir.path(), "m.csv", &csv);
    let o = run(&["distance", "--set", &format!("geometry.matrix=\"{}\"", s(&m))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let d = spectrum_rows(&stdout(&o));
    // Four codewords, C(4, 2) pairs.
    assert_eq!(d.len(), 6);

    // Oracle: enumerate the ±1 datawords and take the closest pair.
    let words: Vec<[f64; 2]> = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]].to_vec();
    let mut best = f64::INFINITY;
    for a in &words {
        for b in &words {
            if a != b {
                let diff: f64 = rows
                    .iter()
                    .map(|r| (r[0] * (a[0] - b[0]) + r[1] * (a[1] - b[1])).powi(2))
                    .sum();
                best = best.min(diff.sqrt());
            }
        }
    }
    let d_min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((d_min - best).abs() < 1e-12);
    assert!((d_min - 2.0 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn distance_is_scale_invariant() {
    let dir = TempDir::new().unwrap();
    let l = lambda();
    let stack = preset_systematic_42(CarrierSpec::new(25e9).unwrap(), 0.4 * l, 12.0 * l).unwrap();
    let text = ris_dcc::geometry::geometry_to_string(&stack);
    // Every length doubled, frequency halved.
    let scaled: String = text
        .lines()
        .map(|line| {
            let f: Vec<&str> = line.split_whitespace().collect();
            match f[0] {
                "frequency_hz" => format!("frequency_hz {}\n", f[1].parse::<f64>().unwrap() / 2.0),
                "1" | "2" => format!(
                    "{} {:?} {:?} {:?}\n",
                    f[0],
                    2.0 * f[1].parse::<f64>().unwrap(),
                    2.0 * f[2].parse::<f64>().unwrap(),
                    2.0 * f[3].parse::<f64>().unwrap()
                ),
                _ => format!("{line}\n"),
            }
        })
        .collect();
    assert_eq!(read_geometry(scaled.as_bytes()).unwrap().layer1().len(), 2);
    let a = write(dir.path(), "a.txt", &text);
    let b = write(dir.path(), "b.txt", &scaled);
    let outs: Vec<Vec<f64>> = [a, b]
        .iter()
        .map(|p| {
            let o = run(&["distance", "--set", &format!("geometry.file=\"{}\"", s(p))]);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            spectrum_rows(&stdout(&o))
        })
        .collect();
    assert_eq!(outs[0].len(), 6);
    for (x, y) in outs[0].iter().zip(&outs[1]) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn encode_hamming_and_block() {
    let o = run(&["encode", "--set", "code.kind=hamming74", "--set", "encode.datawords=[\"1011\", \"0000\"]"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let code74 = ris_dcc::baseline::Hamming74Code::new();
    let want: String = code74.encode(&[1, 0, 1, 1]).unwrap().iter().map(|b| b.to_string()).collect();
    assert_eq!(stdout(&o).lines().next().unwrap(), format!("1011 {want}"));

    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{REPETITION}[encode]\ndatawords = [\"01\", \"11\"]\n"));
    let o = run(&["encode", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // Repetition: outputs 3 and 4 repeat outputs 1 and 2.
    let vals: Vec<Vec<String>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(vals.len(), 8);
    assert_eq!(vals[0][2..], vals[2][2..]);
    assert_eq!(vals[1][2..], vals[3][2..]);

    let o = run(&["encode", "--config", s(&cfg), "--set", "encode.datawords=[\"2\"]"]);
    assert_eq!(code(&o), 2);
}

fn q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

const UNCODED: &str = "seed = 5\nmodulation = \"bpsk\"\n[code]\nkind = \"uncoded\"\n[snr]\nstart_db = 6\nstop_db = 6\nstep_db = 1\n[stopping]\ntarget_errors = 200\nmax_bits = 1e7\n";

#[test]
fn ber_matches_q_function_and_repeats() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", UNCODED);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = run(&["ber", "--config", s(&cfg), "--output", s(p)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scheme,detector,modulation,geometry_digest,seed,eb_n0_db,frames,bit_errors,ber,ci95");
    let f: Vec<&str> = lines[1].split(',').collect();
    let (ber, ci): (f64, f64) = (f[8].parse().unwrap(), f[9].parse().unwrap());
    let want = q((2.0 * 10f64.powf(0.6)).sqrt());
    assert!((want - 2.388e-3).abs() < 1e-6);
    assert!((ber - want).abs() <= 3.0 * ci, "ber {ber} vs {want} ± {ci}");
}

#[test]
fn overrides_take_precedence() {
    let dir = TempDir::new().unwrap();
    let out_cfg = format!("output = \"from_config.csv\"\n{UNCODED}");
    let cfg = write(dir.path(), "c.toml", &out_cfg);
    let o = run(&["ber", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let from_file = std::fs::read_to_string(dir.path().join("from_config.csv")).unwrap();
    assert!(from_file.lines().nth(1).unwrap().contains(",5,6,"));

    let cli_out = dir.path().join("cli.csv");
    let o = run(&[
        "ber",
        "--config",
        s(&cfg),
        "--seed",
        "9",
        "--set",
        "snr.start_db=4",
        "--set",
        "snr.stop_db=4",
        "--output",
        s(&cli_out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&cli_out).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4], "9");
    assert_eq!(row[5], "4");
    // --seed beats a --set seed too.
    let o = run(&["ber", "--config", s(&cfg), "--set", "seed=3", "--seed", "9", "--output", s(&cli_out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&cli_out).unwrap().lines().nth(1).unwrap().split(',').nth(4), Some("9"));
}

#[test]
fn compare_merges_in_snr_order() {
    let dir = TempDir::new().unwrap();
    let sweep = "[snr]\nstart_db = 2\nstop_db = 4\nstep_db = 1\n[stopping]\ntarget_errors = 50\nmax_bits = 200000\n";
    let a = write(dir.path(), "a.toml", &format!("seed = 2\n[code]\nkind = \"uncoded\"\n{sweep}"));
    let b = write(dir.path(), "b.toml", &format!("seed = 2\n[code]\nkind = \"hamming74\"\n{sweep}"));
    let o = run(&["compare", "--config", s(&a), "--config", s(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(text.lines().filter(|l| l.starts_with("scheme")).count(), 1);
    assert_eq!(rows.len(), 6);
    let snrs: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(snrs.windows(2).all(|w| w[0] <= w[1]));
    let mut schemes: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    schemes.sort();
    schemes.dedup();
    assert_eq!(schemes, ["hamming74", "uncoded"]);

    let o = run(&["compare", "--config", s(&a), "--config", s(&a)]);
    assert_eq!(code(&o), 2);
    let o = run(&["compare", "--config", s(&a), "--config", s(&a), "--set", "code.label=same"]);
    assert_eq!(code(&o), 2);
}

const OPTIMIZE: &str = "seed = 4\n[geometry]\npreset = \"systematic_42\"\nd = 0.4\ndz = 12\n[optimize]\nspace = \"separation\"\nseparation_min = 10\nseparation_max = 20\nbudget = 40\n";

#[test]
fn optimize_separation_beats_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", OPTIMIZE);
    let out = dir.path().join("best.txt");
    let o = run(&["optimize", "--config", s(&cfg), "--output", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let best = read_geometry(std::fs::read_to_string(&out).unwrap().as_bytes()).unwrap();
    let got = objective(&best, ModulationScheme::Bpsk).unwrap();

    let l = lambda();
    let base = preset_systematic_42(CarrierSpec::new(25e9).unwrap(), 0.4 * l, 12.0 * l).unwrap();
    let space = SearchSpace::separation_sweep(base, 10.0 * l, 20.0 * l).unwrap();
    let grid = (0..=40)
        .map(|i| {
            let dz = 10.0 * l + 10.0 * l * i as f64 / 40.0;
            objective(&space.stack_at(&[dz]).unwrap(), ModulationScheme::Bpsk).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(got >= grid - 1e-6, "{got} vs grid {grid}");

    // The written geometry validates, and the trace repeats under the same seed.
    let o = run(&["validate", "--set", &format!("geometry.file=\"{}\"", s(&out))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = std::fs::read_to_string(dir.path().join("best.txt.trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,d_min\n"));
    let again = dir.path().join("again.txt");
    let o = run(&["optimize", "--config", s(&cfg), "--output", s(&again)]);
    assert_eq!(code(&o), 0);
    assert_eq!(trace, std::fs::read_to_string(dir.path().join("again.txt.trace.csv")).unwrap());
}

#[test]
fn optimize_reports_infeasible_space() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", OPTIMIZE);
    let o = run(&[
        "optimize",
        "--config",
        s(&cfg),
        "--set",
        "optimize.separation_min=1",
        "--set",
        "optimize.separation_max=2",
        "--output",
        s(&dir.path().join("x.txt")),
    ]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}
