//! Key-value rendering of evaluation reports. Values are percentages
//! (fractions scaled by 100) printed with four decimals so golden files are
//! byte-stable:
//!
//! ```text
//! metrics v1
//! mAP 100.0000
//! AP75 100.0000
//! AR1 50.0000
//! AR10 100.0000
//! category 1 AP 100.0000
//! threshold 0.50 AP 100.0000
//! ```

use clipvis_core::EvalReport;

pub const HEADER: &str = "metrics v1";

fn pct(fraction: f64) -> String {
    format!("{:.4}", fraction * 100.0)
}

/// The four headline numbers, one `key value` pair per line.
pub fn summary_lines(report: &EvalReport) -> String {
    format!(
        "mAP {}\nAP75 {}\nAR1 {}\nAR10 {}\n",
        pct(report.mean_ap),
        pct(report.ap75),
        pct(report.ar1),
        pct(report.ar10)
    )
}

/// Full report: headline numbers plus per-category and per-threshold AP.
pub fn render(report: &EvalReport) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    out.push_str(&summary_lines(report));
    for category in &report.per_category {
        out.push_str(&format!(
            "category {} AP {}\n",
            category.category,
            pct(category.ap)
        ));
    }
    for threshold in &report.per_threshold {
        out.push_str(&format!(
            "threshold {:.2} AP {}\n",
            threshold.threshold,
            pct(threshold.mean_ap)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use clipvis_core::{CategoryReport, ThresholdReport};

    fn report() -> EvalReport {
        EvalReport {
            mean_ap: 0.3,
            ap75: 0.0,
            ar1: 0.5,
            ar10: 1.0,
            per_category: vec![CategoryReport {
                category: 2,
                ap: 0.3,
            }],
            per_threshold: vec![ThresholdReport {
                threshold: 0.5,
                mean_ap: 1.0,
            }],
        }
    }

    #[test]
    fn scales_fractions_to_fixed_point_percentages() {
        let text = render(&report());
        assert_eq!(
            text,
            "metrics v1\nmAP 30.0000\nAP75 0.0000\nAR1 50.0000\nAR10 100.0000\n\
             category 2 AP 30.0000\nthreshold 0.50 AP 100.0000\n"
        );
    }

    #[test]
    fn summary_is_a_prefix_of_the_full_report() {
        let report = report();
        let full = render(&report);
        assert!(full
            .strip_prefix("metrics v1\n")
            .unwrap()
            .starts_with(&summary_lines(&report)));
    }
}
