//! Ready-to-run gnuplot scripts for emitted CSV files.

use std::collections::BTreeSet;

use vtmos::experiments::Table;

struct Plot<'a> {
    x: &'a str,
    y: &'a str,
    /// Columns whose distinct values become separate series.
    series: &'a [&'a str],
    log_x: bool,
    log_y: bool,
}

fn header(csv: &str, title: &str, plot: &Plot<'_>) -> String {
    let stem = csv.trim_end_matches(".csv");
    let mut s = format!(
        "set datafile separator ','\nset terminal pngcairo size 900,600\nset output '{stem}.png'\n\
         set title '{title}'\nset xlabel '{}'\nset ylabel '{}'\nset key outside right\nset grid\n",
        plot.x, plot.y
    );
    if plot.log_x {
        s.push_str("set logscale x\n");
    }
    if plot.log_y {
        s.push_str("set logscale y\n");
    }
    s
}

fn column_ref(t: &Table, name: &str) -> Option<usize> {
    t.header.iter().position(|h| h == name).map(|i| i + 1)
}

fn table_script(t: &Table, plot: &Plot<'_>) -> Option<String> {
    let xc = column_ref(t, plot.x)?;
    let yc = column_ref(t, plot.y)?;
    let keys: Vec<usize> = plot
        .series
        .iter()
        .map(|s| column_ref(t, s))
        .collect::<Option<_>>()?;
    let groups: BTreeSet<Vec<String>> = t
        .rows
        .iter()
        .map(|r| keys.iter().map(|&k| r[k - 1].clone()).collect())
        .collect();
    let mut s = header(&t.name, &t.name, plot);
    let clauses: Vec<String> = groups
        .iter()
        .map(|g| {
            let cond = keys
                .iter()
                .zip(g)
                .map(|(k, v)| format!("strcol({k}) eq '{v}'"))
                .collect::<Vec<_>>()
                .join(" && ");
            let cond = if cond.is_empty() {
                "1".to_string()
            } else {
                cond
            };
            format!(
                "'{}' skip 1 using {xc}:(({cond}) ? ${yc} : NaN) with linespoints title '{}'",
                t.name,
                g.join(" ")
            )
        })
        .collect();
    s.push_str("plot ");
    s.push_str(&clauses.join(", \\\n     "));
    s.push('\n');
    Some(s)
}

/// Scripts for the experiment tables that have a natural plot.
pub fn experiment_scripts(tables: &[Table]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for t in tables {
        let plots: &[(&str, Plot<'_>)] = match t.name.as_str() {
            "iv_vgs.csv" => &[(
                "",
                Plot {
                    x: "v_gs",
                    y: "i_ds",
                    series: &["v_an"],
                    log_x: false,
                    log_y: true,
                },
            )],
            "iv_vds.csv" => &[(
                "",
                Plot {
                    x: "v_ds",
                    y: "i_ds",
                    series: &["v_an"],
                    log_x: false,
                    log_y: false,
                },
            )],
            "vtc.csv" => &[(
                "",
                Plot {
                    x: "v_in",
                    y: "v_out",
                    series: &["style", "v_an"],
                    log_x: false,
                    log_y: false,
                },
            )],
            "bias_sweep.csv" => &[
                (
                    "_delay",
                    Plot {
                        x: "v_an",
                        y: "tp_avg",
                        series: &["gate", "style"],
                        log_x: false,
                        log_y: false,
                    },
                ),
                (
                    "_power",
                    Plot {
                        x: "v_an",
                        y: "p_avg",
                        series: &["gate", "style"],
                        log_x: false,
                        log_y: false,
                    },
                ),
                (
                    "_pdp",
                    Plot {
                        x: "v_an",
                        y: "pdp",
                        series: &["gate", "style"],
                        log_x: false,
                        log_y: false,
                    },
                ),
            ],
            "frequency_sweep.csv" => &[(
                "",
                Plot {
                    x: "frequency",
                    y: "p_avg",
                    series: &["gate", "style", "v_an"],
                    log_x: true,
                    log_y: true,
                },
            )],
            _ => &[],
        };
        for (suffix, plot) in plots {
            if let Some(mut script) = table_script(t, plot) {
                let stem = format!("{}{suffix}", t.name.trim_end_matches(".csv"));
                script = script.replacen(
                    &format!("set output '{}.png'", t.name.trim_end_matches(".csv")),
                    &format!("set output '{stem}.png'"),
                    1,
                );
                out.push((format!("{stem}.gp"), script));
            }
        }
    }
    out
}

/// All columns after the first plotted against it.
pub fn columns_script(csv: &str, columns: &[String], log_x: bool) -> String {
    let plot = Plot {
        x: columns.first().map_or("x", |s| s.as_str()),
        y: "value",
        series: &[],
        log_x,
        log_y: false,
    };
    let mut s = header(csv, csv, &plot);
    let clauses: Vec<String> = columns
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, h)| h.starts_with("v("))
        .map(|(i, h)| format!("'{csv}' skip 1 using 1:{} with lines title '{h}'", i + 1))
        .collect();
    s.push_str("plot ");
    s.push_str(&clauses.join(", \\\n     "));
    s.push('\n');
    s
}
