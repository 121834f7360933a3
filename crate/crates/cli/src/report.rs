//! Plot-ready CSV tables.
//!
//! Column sets are fixed; numbers use the shortest round-trip decimal form.

use std::io::Write;

use nli_planner::campaign::CampaignResult;
use nli_planner::perf::{ChannelEvaluation, SnrReport};

use crate::schema::OracleResult;

pub const CHANNELS_COLUMNS: [&str; 8] =
    ["index", "f_center_thz", "format", "snr_db", "nli_psd_w_per_thz", "p_nli_w", "p_ase_w", "p_signal_w"];
pub const SPANS_COLUMNS: [&str; 6] = ["span", "snr_db", "p_signal_w", "p_ase_w", "p_nli_w", "nli_psd_w_per_thz"];
pub const STATS_COLUMNS: [&str; 9] =
    ["variant", "cut_position", "n", "mean_db", "std_db", "peak_db", "peak_to_peak_db", "min_db", "max_db"];
pub const HISTOGRAM_COLUMNS: [&str; 4] = ["variant", "cut_position", "center_db", "count"];
pub const SYSTEMS_FIXED_COLUMNS: [&str; 6] =
    ["index", "category", "cut_position", "max_reach_spans", "threshold_db", "benchmark_snr_db"];
pub const ORACLE_COLUMNS: [&str; 4] = ["f_eval_thz", "span", "nli_psd_w_per_thz", "p_nli_w"];

fn num(x: f64) -> String {
    format!("{x:?}")
}

/// One row per evaluated channel.
pub fn write_channels<W: Write>(out: W, channels: &[ChannelEvaluation]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CHANNELS_COLUMNS)?;
    for c in channels {
        w.write_record([
            c.index.to_string(),
            num(c.f_center_thz),
            c.format.name().to_string(),
            num(c.snr_db),
            num(c.nli_psd_w_per_thz),
            num(c.p_nli_w),
            num(c.p_ase_w),
            num(c.p_signal_w),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per truncation 1…N of the CUT report.
pub fn write_spans<W: Write>(out: W, report: &SnrReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SPANS_COLUMNS)?;
    for s in 0..report.n_spans() {
        w.write_record([
            (s + 1).to_string(),
            num(report.per_span_snr_db[s]),
            num(report.p_signal_w[s]),
            num(report.p_ase_w[s]),
            num(report.p_nli_w[s]),
            num(report.nli_psd_w_per_thz[s]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn position_name(p: Option<nli_planner::sysgen::CutPosition>) -> &'static str {
    p.map_or("all", |p| p.name())
}

/// Error statistics per variant and CUT position; `all` pools positions.
pub fn write_stats<W: Write>(out: W, result: &CampaignResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATS_COLUMNS)?;
    for g in &result.stats {
        let s = &g.stats;
        w.write_record([
            g.variant.clone(),
            position_name(g.cut_position).to_string(),
            s.n.to_string(),
            num(s.mean),
            num(s.std_dev),
            num(s.peak),
            num(s.peak_to_peak),
            num(s.min),
            num(s.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram<W: Write>(out: W, result: &CampaignResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTOGRAM_COLUMNS)?;
    for g in &result.stats {
        for b in &g.stats.bins {
            w.write_record([
                g.variant.clone(),
                position_name(g.cut_position).to_string(),
                num(b.center_db),
                b.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Fixed columns followed by one `delta_<variant>` column per variant.
pub fn write_systems<W: Write>(out: W, result: &CampaignResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = SYSTEMS_FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(result.variants.iter().map(|v| format!("delta_{v}")))
        .collect();
    w.write_record(&header)?;
    for s in &result.systems {
        let mut row = vec![
            s.index.to_string(),
            s.category.number().to_string(),
            s.cut_position.name().to_string(),
            s.max_reach_spans.to_string(),
            num(s.threshold_db),
            num(s.benchmark_snr_db),
        ];
        row.extend(s.delta_snr_db.iter().map(|d| num(*d)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per evaluation frequency and truncation; `p_nli_w` repeats per frequency.
pub fn write_oracle<W: Write>(out: W, result: &OracleResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ORACLE_COLUMNS)?;
    for (f, psds) in result.f_eval_thz.iter().zip(&result.nli_psd_w_per_thz) {
        for (s, g) in psds.iter().enumerate() {
            w.write_record([num(*f), (s + 1).to_string(), num(*g), num(result.p_nli_w[s])])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nli_planner::model::ModulationFormat;

    #[test]
    fn channel_table_layout() {
        let row = ChannelEvaluation {
            index: 2,
            f_center_thz: 193.8,
            format: ModulationFormat::Pm16Qam,
            snr_db: 15.25,
            nli_psd_w_per_thz: 1e-6,
            p_nli_w: 6.4e-8,
            p_ase_w: 1e-7,
            p_signal_w: 1e-3,
        };
        let mut buf = Vec::new();
        write_channels(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "index,f_center_thz,format,snr_db,nli_psd_w_per_thz,p_nli_w,p_ase_w,p_signal_w\n\
             2,193.8,PM-16QAM,15.25,1e-6,6.4e-8,1e-7,0.001\n"
        );
    }
}
