use std::path::Path;
use std::process::{Command, Output};

use symgrand::likelihood::StructureTable;
use symgrand::{Gf2Matrix, LinearCode};

fn symgrand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symgrand"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = symgrand(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dump_constellation_fixture() {
    let text = stdout(&["dump-constellation", "--mod", "16"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 18);
    assert!(lines[0].starts_with("# M=16"));
    assert!(lines.contains(&"1101\t-0.948683\t0.948683\tcorner\t1000,0100\t1100"));
    let corners = lines.iter().filter(|l| l.contains("\tcorner\t")).count();
    let inner = lines.iter().filter(|l| l.contains("\tinner\t")).count();
    assert_eq!((corners, inner), (4, 4));
}

#[test]
fn dump_bit_patterns_order() {
    let text = stdout(&["dump-patterns", "--decoder", "bit", "--n", "4", "--wth", "2", "--count", "100"]);
    // bit 0 is the high bit of the first nibble
    let expected = ["0", "8", "4", "2", "1", "c", "a", "6", "9", "5", "3"];
    assert_eq!(text.lines().collect::<Vec<_>>(), expected);
}

#[test]
fn dump_symbol_patterns_start_with_zero_then_e1() {
    let text = stdout(&[
        "dump-patterns", "--decoder", "symbol", "--y", "11010000", "--wth", "1", "--snr-db", "20",
        "--count", "50",
    ]);
    // corner 1101 has two E1 strings, inner 0000 has four
    assert_eq!(text.lines().collect::<Vec<_>>(), ["00", "80", "40", "08", "04", "02", "01"]);
}

#[test]
fn table_round_trips_through_text() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.txt");
    stdout(&["table", "--L", "32", "--grid", "0:1:33", "--wth", "3", "--top", "5", "--out", path_str(&out)]);
    let table = StructureTable::from_text(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(table.snr_grid_db.len(), 34);
    assert!(table.rows.iter().all(|r| r.len() == 5));
    assert_eq!((table.row_for_snr(30.0)[0].l1, table.row_for_snr(30.0)[0].l2), (1, 0));
}

#[test]
fn export_code_is_a_valid_pair() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&["export-code", "--n", "24", "--k", "12", "--seed", "5", "--out-dir", path_str(dir.path())]);
    let g = Gf2Matrix::from_text(&std::fs::read_to_string(dir.path().join("G.txt")).unwrap()).unwrap();
    let h = Gf2Matrix::from_text(&std::fs::read_to_string(dir.path().join("H.txt")).unwrap()).unwrap();
    let code = LinearCode::from_matrices(g, h).unwrap();
    assert_eq!(code, LinearCode::random(24, 12, 5).unwrap());
}

#[test]
fn simulate_echoes_config_and_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    stdout(&[
        "simulate", "--ebn0", "8:2:10", "--max-blocks", "300", "--min-errors", "10", "--out",
        path_str(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# n=128\n") && text.contains("# seed=1\n"));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "ebn0_db,decoder,channel,w_th,blocks,block_errors,bler,avg_tests,abandonments");
    assert_eq!(data.len(), 5);
}

#[test]
fn bad_config_and_bad_path_fail() {
    let dir = tempfile::tempdir().unwrap();
    let ok_path = dir.path().join("x.csv");
    assert!(!symgrand(&["simulate", "--n", "130", "--out", path_str(&ok_path)]).status.success());
    assert!(!symgrand(&["simulate", "--k", "128", "--out", path_str(&ok_path)]).status.success());
    assert!(!symgrand(&["dump-constellation", "--mod", "8"]).status.success());
    let bad = dir.path().join("missing/dir/x.csv");
    let out = symgrand(&["simulate", "--max-blocks", "10", "--out", path_str(&bad)]);
    assert!(!out.status.success());
}
