mod common;

use std::time::{Duration, Instant};

use common::{cli, fixture, stdout};

#[test]
fn missing_input_exits_2_without_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .arg("fit")
        .env("CARCASSWATCH_INPUT", dir.path().join("absent.csv"))
        .env("CARCASSWATCH_OUTPUT_DIR", dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));
    assert!(!dir.path().join("out/fit.json").exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cli().arg("frobnicate").output().unwrap().status.code(), Some(2));
    assert_eq!(cli().arg("chart").output().unwrap().status.code(), Some(2));
    let bad_level = cli().arg("fit").env("CARCASSWATCH_LEVEL", "2").output().unwrap();
    assert_eq!(bad_level.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let no_artifact = cli()
        .args(["chart", "--region", "15", "--group", "PI", "--artifact"])
        .arg(dir.path().join("fit.json"))
        .output()
        .unwrap();
    assert_eq!(no_artifact.status.code(), Some(2));
}

#[test]
fn malformed_rows_are_rejected_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    std::fs::write(
        &input,
        "REGION,RECORD (n),LAT,LON,Sample TIME,SPECIES Type,SPECIES\n\
         2,3,-23.6,-70.4,2023-02-01,PI,Otaria flavescens\n\
         2,3,north,-70.4,2023-02-01,PI,Otaria flavescens\n\
         13,1,-23.6,-70.4,2023-02-01,PI,Otaria flavescens\n",
    )
    .unwrap();
    let out = cli().arg("validate").env("CARCASSWATCH_INPUT", &input).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["input_rows"], 3);
    assert_eq!(report["records"], 1);
    assert_eq!(report["rejected"], 2);
    assert_eq!(report["total_animals"], 3);
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    std::fs::write(&input, "REGION,RECORD (n)\n2,3\n").unwrap();
    let out = cli().arg("validate").env("CARCASSWATCH_INPUT", &input).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_accepts_the_toy_fixture() {
    let out = cli().arg("validate").arg("--config").arg(fixture("toy.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["records"], 200);
    assert_eq!(report["rejected"], 0);
}

/// Column 2 of the fixture, summed without the library's parser.
fn fixture_total() -> u64 {
    let text = std::fs::read_to_string(fixture("toy_strandings.csv")).unwrap();
    text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum()
}

#[test]
fn summarize_writes_tables_as_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .arg("summarize")
        .arg("--config")
        .arg(fixture("toy.toml"))
        .env("CARCASSWATCH_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let regions: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary_region.json")).unwrap()).unwrap();
    let total: u64 = regions.iter().map(|r| r["total"].as_u64().unwrap()).sum();
    assert_eq!(total, fixture_total());
    let totals: Vec<u64> = regions.iter().map(|r| r["total"].as_u64().unwrap()).collect();
    assert!(totals.windows(2).all(|w| w[0] >= w[1]));

    let species_csv = std::fs::read_to_string(dir.path().join("summary_species.csv")).unwrap();
    assert!(species_csv.starts_with("species_name,total\n"));
    let csv_total: u64 = species_csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(csv_total, fixture_total());

    let series: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("series.json")).unwrap()).unwrap();
    assert_eq!(series["cumulative"].as_array().unwrap().len(), 26);
    assert_eq!(series["cumulative"][25].as_u64().unwrap(), fixture_total());
    assert_eq!(std::fs::read_to_string(dir.path().join("series.csv")).unwrap().lines().count(), 27);
}

#[test]
fn summarize_empty_dataset_gives_empty_tables() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    std::fs::write(&input, "REGION,RECORD (n),LAT,LON,Sample TIME,SPECIES Type,SPECIES\n").unwrap();
    let out = cli()
        .arg("summarize")
        .env("CARCASSWATCH_INPUT", &input)
        .env("CARCASSWATCH_OUTPUT_DIR", dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for stem in ["summary_region", "summary_group", "summary_species"] {
        assert_eq!(std::fs::read_to_string(dir.path().join(format!("out/{stem}.json"))).unwrap(), "[]");
        assert_eq!(std::fs::read_to_string(dir.path().join(format!("out/{stem}.csv"))).unwrap().lines().count(), 1);
    }
}

#[test]
fn empty_dataset_cannot_be_fitted() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    std::fs::write(&input, "REGION,RECORD (n),LAT,LON,Sample TIME,SPECIES Type,SPECIES\n").unwrap();
    let out = cli()
        .arg("fit")
        .env("CARCASSWATCH_INPUT", &input)
        .env("CARCASSWATCH_OUTPUT_DIR", dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out/fit.json").exists());
}

#[test]
fn toy_fit_is_fast_complete_and_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let mut artifacts = Vec::new();
    for run in ["a", "b"] {
        let started = Instant::now();
        let out = cli()
            .arg("fit")
            .arg("--config")
            .arg(fixture("toy.toml"))
            .env("CARCASSWATCH_OUTPUT_DIR", dir.path().join(run))
            .output()
            .unwrap();
        let elapsed = started.elapsed();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(elapsed < Duration::from_secs(60), "fit took {elapsed:?}");
        let report = std::fs::read_to_string(dir.path().join(run).join("fit_report.txt")).unwrap();
        assert_eq!(report, stdout(&out));
        let hyper_rows = report
            .split("Hyperparameters\n")
            .nth(1)
            .unwrap()
            .lines()
            .skip(1)
            .take_while(|l| !l.is_empty())
            .count();
        assert_eq!(hyper_rows, 8, "{report}");
        assert!(report.contains("Fixed effects"));
        assert!(report.contains("Intercept"));
        artifacts.push(std::fs::read(dir.path().join(run).join("fit.json")).unwrap());
    }
    assert!(artifacts[0] == artifacts[1], "reruns differ");
}
