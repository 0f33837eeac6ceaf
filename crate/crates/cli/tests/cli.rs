use std::path::Path;
use std::process::{Command, Output};

fn padres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_padres")).args(args).env("SOURCE_DATE_EPOCH", "0").output().expect("run padres")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const CROSSING: &str = "alpha,root,energy\n\
0.8,0,0.80\n0.9,0,0.895\n1.0,0,0.99\n1.1,0,1.0\n1.2,0,1.0\n\
0.8,1,1.20\n0.9,1,1.105\n1.0,1,1.01\n1.1,1,1.1\n1.2,1,1.2\n";

#[test]
fn constant_window_gives_constant_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "const.csv", "alpha,energy\n0.9,0.7\n1.0,0.7\n1.1,0.7\n");
    let o = padres(&["fit", "--window", &path, "--points", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("E_1 = 0.7\n"), "{text}");
    assert!(text.contains("z_1 = 0.0\n") && text.contains("z_2 = 0.0\n"), "{text}");
    assert!(text.contains("C(eta) = 0.7 for every eta"), "{text}");
}

#[test]
fn validation_errors_exit_2() {
    let o = padres(&["--alpha", "1.6:0.6:10", "stabilize"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));

    let o = padres(&["--model", "gaussian:0.8", "stabilize"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "alpha,root,energy\n1.0,0,0.5\n0.9,0,0.4\n");
    let o = padres(&["--import", &bad, "stabilize"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write(dir.path(), "bad.cfg", "fit.order = 10\nwindows.flatnes_tol = 1\n");
    let o = padres(&["--config", &cfg, "--show-config"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn crossing_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "crossing.csv", CROSSING);
    let o = padres(&["--import", &path, "fit", "--window", "w0-0-4"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("avoided crossing") && err.contains("hint:"), "{err}");
    let o = padres(&["--import", &path, "fit", "--window", "w0-0-4", "--force", "--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["forced"], true);
}

#[test]
fn show_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = padres(&["--set", "fit.order=12", "--show-config"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("fit.order = 12"));
    let cfg = write(dir.path(), "c.cfg", &text);
    let again = padres(&["--config", &cfg, "--show-config"]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn session_file_accumulates_steps() {
    let dir = tempfile::tempdir().unwrap();
    let session = dir.path().join("s.json").display().to_string();
    let data = write(dir.path(), "crossing.csv", CROSSING);
    assert!(padres(&["--session", &session, "--import", &data, "windows"]).status.success());
    let o = padres(&["--session", &session, "fit", "--window", "w1-2-4", "--force", "--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = padres_core::session::Session::load(Path::new(&session)).unwrap();
    assert_eq!(s.windows.len(), 1);
    assert_eq!(s.fits.len(), 1);
    assert_eq!(s.created_at, "1970-01-01T00:00:00Z");
}

#[test]
fn stabilize_writes_csv_that_imports_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stab.csv");
    let o = padres(&["--basis", "ho:30", "--alpha", "0.8:1.2:11", "--output", out.to_str().unwrap(), "stabilize"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("20 roots x 11 alpha points"));
    let imported = padres_core::io::import_stabilization(&out, padres_core::io::ImportFormat::Csv).unwrap();
    assert_eq!(imported.data.alpha_grid.len(), 11);
    assert_eq!(imported.data.num_roots(), 20);
}
