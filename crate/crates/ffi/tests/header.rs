use std::path::PathBuf;
use std::process::Command;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(root().join("include/reshare.h")).unwrap();
    let src = std::fs::read_to_string(root().join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 15, "{exported:?}");
    for f in exported {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct ReshareSimulation ReshareSimulation;"));
    assert!(h.contains("RESHARE_STATUS_OK = 0"));
}

// Compiles and runs a C program against the static library when a C
// compiler is on PATH.
#[test]
fn c_program_links_against_staticlib() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no cc; skipped");
        return;
    };
    if !cc.status.success() {
        return;
    }
    let target = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target");
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    let lib = ["debug", "release", profile]
        .iter()
        .map(|p| target.join(p).join("libreshare_ffi.a"))
        .find(|p| p.exists());
    let Some(lib) = lib else {
        eprintln!("libreshare_ffi.a not built; skipped");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("main.c");
    let scenario = root().join("../../scenarios/ramp.json");
    std::fs::write(
        &c,
        format!(
            r#"#include <stdio.h>
#include "reshare.h"
int main(void) {{
  ReshareScenario *sc = NULL;
  if (reshare_scenario_load("{}", &sc) != RESHARE_STATUS_OK) return 2;
  ReshareSimulation *sim = NULL;
  if (reshare_simulation_new(sc, "reshare", false, &sim) != RESHARE_STATUS_OK) return 3;
  if (reshare_simulation_arrive(sim, 1, 0, 0, 0.0, -1.0, 12.0) != RESHARE_STATUS_OK) return 4;
  ReshareCost cost;
  reshare_simulation_cost(sim, &cost);
  if (reshare_simulation_depart(sim, 99, 1.0) == RESHARE_STATUS_OK) return 5;
  if (reshare_last_error() == NULL) return 6;
  printf("%g %llu\n", cost.phi, (unsigned long long)cost.vm_count);
  reshare_simulation_free(sim);
  reshare_scenario_free(sc);
  return 0;
}}
"#,
            scenario.display()
        ),
    )
    .unwrap();
    let exe = dir.path().join("main");
    let out = Command::new("cc")
        .arg(&c)
        .arg("-I")
        .arg(root().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.split_whitespace().next().unwrap().parse::<f64>().unwrap() > 0.0);
}
