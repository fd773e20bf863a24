//! Run outputs: the record stream and the result bundle, as CSV or JSON.
//!
//! Both formats carry the same numbers. CSV files start with a versioned
//! `#` comment line naming the column layout.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::experiment::{Mode, TimingClass};
use crate::montecarlo::TrialRecord;
use crate::stats::{
    chsh, chsh_exact, correlator, no_signaling_test, single_particle_rates, ChshResult, ChshSettings, Correlator,
    SignalingReport, SingleParticleReport,
};
use crate::theories::{JointDistribution, TheoryModel};

pub const RECORDS_HEADER: &str = "# multisim records v1: setting,trial,alpha,beta,outcome";
pub const REPORT_HEADER: &str = "# multisim report v1: key,value,stderr";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub format_version: u32,
    pub model: TheoryModel,
    pub mode: Mode,
    pub timing: Option<TimingClass>,
    pub seed: u64,
    pub trials_per_setting: u64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub metadata: RunMetadata,
    pub analytic: Vec<JointDistribution>,
    pub correlators: Vec<Correlator>,
    pub chsh: Option<ChshResult>,
    pub chsh_analytic: Option<f64>,
    pub signaling: Option<SignalingReport>,
    pub single_particle: Vec<SingleParticleReport>,
}

/// One numeric row of the flattened bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub key: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

impl ResultBundle {
    /// Builds every report that applies to the mode and the settings list.
    /// Records must be grouped by setting index, as `montecarlo::run` emits
    /// them.
    pub fn build(meta: RunMetadata, analytic: Vec<JointDistribution>, records: &[TrialRecord]) -> Self {
        let groups: Vec<&[TrialRecord]> = records.chunk_by(|a, b| a.setting_index == b.setting_index).collect();
        let mut bundle = Self {
            metadata: meta,
            analytic,
            correlators: Vec::new(),
            chsh: None,
            chsh_analytic: None,
            signaling: None,
            single_particle: Vec::new(),
        };
        let k = bundle.metadata.k;
        match bundle.metadata.mode {
            Mode::TwoParticle => {
                bundle.correlators = groups.iter().filter_map(|g| correlator(g).ok()).collect();
                let settings: Vec<_> = bundle.analytic.iter().map(|d| d.settings).collect();
                if let Some(angles) = ChshSettings::from_pairs(&settings) {
                    bundle.chsh = chsh(records, &angles, k).ok();
                    let dists: [JointDistribution; 4] = bundle.analytic.clone().try_into().expect("four settings");
                    bundle.chsh_analytic = chsh_exact(&dists, k).ok().map(|c| c.s);
                }
                bundle.signaling = no_signaling_test(records, k).ok();
            }
            Mode::SingleParticle => {
                bundle.single_particle = groups.iter().filter_map(|g| single_particle_rates(g).ok()).collect();
            }
        }
        bundle
    }

    /// Every number in the bundle (metadata aside) as key/value/stderr rows.
    pub fn rows(&self) -> Vec<Row> {
        let mut out = Vec::new();
        let mut push = |key: String, value: f64, stderr: Option<f64>| out.push(Row { key, value, stderr });
        for (i, d) in self.analytic.iter().enumerate() {
            push(format!("analytic[{i}].alpha"), d.settings.alpha, None);
            push(format!("analytic[{i}].beta"), d.settings.beta, None);
            for (o, p) in d.iter() {
                push(format!("analytic[{i}].p[{o}]"), p, None);
            }
        }
        for (i, c) in self.correlators.iter().enumerate() {
            push(format!("correlator[{i}].alpha"), c.settings.alpha, None);
            push(format!("correlator[{i}].beta"), c.settings.beta, None);
            push(format!("correlator[{i}].E"), c.e, Some(c.stderr));
            if let Some(n) = c.counts {
                for (code, v) in [("++", n.pp), ("+-", n.pm), ("-+", n.mp), ("--", n.mm)] {
                    push(format!("correlator[{i}].N[{code}]"), v as f64, None);
                }
            }
        }
        if let Some(c) = &self.chsh {
            push("chsh.S".into(), c.s, Some(c.stderr));
            push("chsh.violates_local_bound".into(), c.violates_local_bound as u8 as f64, None);
        }
        if let Some(s) = self.chsh_analytic {
            push("chsh.S_analytic".into(), s, None);
        }
        if let Some(r) = &self.signaling {
            for (side, s) in [("a", &r.side_a), ("b", &r.side_b)] {
                push(format!("signaling.{side}.max_delta"), s.max_delta, Some(s.stderr));
                push(format!("signaling.{side}.threshold"), s.threshold, None);
            }
            let detected = r.verdict == crate::stats::SignalingVerdict::SignalingDetected;
            push("signaling.detected".into(), detected as u8 as f64, None);
        }
        for (i, s) in self.single_particle.iter().enumerate() {
            push(format!("single[{i}].n"), s.n as f64, None);
            push(format!("single[{i}].joint"), s.joint, Some(s.joint_stderr));
            push(format!("single[{i}].none"), s.none, Some(s.none_stderr));
            push(format!("single[{i}].exclusive"), s.exclusive, Some(s.exclusive_stderr));
            push(format!("single[{i}].exclusive_plus"), s.exclusive_plus, None);
            push(format!("single[{i}].exclusive_minus"), s.exclusive_minus, None);
        }
        out
    }

    fn metadata_comment(&self) -> String {
        let m = &self.metadata;
        let timing = m.timing.map_or("none".to_string(), |t| t.to_string());
        format!(
            "# tool_version={} model={} mode={:?} timing={} seed={} trials_per_setting={} k={}",
            m.tool_version, m.model, m.mode, timing, m.seed, m.trials_per_setting, m.k
        )
    }

    pub fn write(&self, w: &mut impl Write, format: Format) -> std::io::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *w, self)?;
                writeln!(w)
            }
            Format::Csv => {
                writeln!(w, "{REPORT_HEADER}")?;
                writeln!(w, "{}", self.metadata_comment())?;
                let mut csv = csv::Writer::from_writer(w);
                csv.write_record(["key", "value", "stderr"])?;
                for r in self.rows() {
                    let se = r.stderr.map(|s| s.to_string()).unwrap_or_default();
                    csv.write_record([r.key, r.value.to_string(), se])?;
                }
                csv.flush()
            }
        }
    }
}

/// Parses the CSV form of a report back into rows.
pub fn read_report_csv(text: &str) -> Result<Vec<Row>, csv::Error> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| csv::Error::from(std::io::Error::other(e)));
        out.push(Row {
            key: rec[0].to_string(),
            value: num(&rec[1])?,
            stderr: if rec[2].is_empty() { None } else { Some(num(&rec[2])?) },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub setting: usize,
    pub trial: u64,
    pub alpha: f64,
    pub beta: f64,
    pub outcome: String,
}

impl From<&TrialRecord> for RecordRow {
    fn from(r: &TrialRecord) -> Self {
        Self {
            setting: r.setting_index,
            trial: r.trial,
            alpha: r.settings.alpha,
            beta: r.settings.beta,
            outcome: r.outcome.code().to_string(),
        }
    }
}

pub fn write_records(w: &mut impl Write, records: &[TrialRecord], format: Format) -> std::io::Result<()> {
    let rows = records.iter().map(RecordRow::from);
    match format {
        Format::Json => {
            let rows: Vec<RecordRow> = rows.collect();
            serde_json::to_writer(&mut *w, &rows)?;
            writeln!(w)
        }
        Format::Csv => {
            writeln!(w, "{RECORDS_HEADER}")?;
            let mut csv = csv::Writer::from_writer(w);
            for r in rows {
                csv.serialize(r)?;
            }
            csv.flush()
        }
    }
}

pub fn read_records_csv(text: &str) -> Result<Vec<RecordRow>, csv::Error> {
    let body = text.strip_prefix(RECORDS_HEADER).unwrap_or(text).trim_start_matches('\n');
    csv::Reader::from_reader(body.as_bytes()).deserialize().collect()
}
