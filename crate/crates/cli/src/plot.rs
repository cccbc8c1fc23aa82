use std::io;
use std::path::Path;

/// How one CSV artifact is drawn.
struct Chart {
    stem: &'static str,
    title: &'static str,
    xlabel: &'static str,
    ylabel: &'static str,
    extra: &'static str,
    plot: &'static str,
}

const IMPORTANCE_PLOT: &str = "'DATA' using 0:4:xtic(1) with boxes title 'score'";

const CHARTS: &[Chart] = &[
    Chart {
        stem: "history",
        title: "Training history",
        xlabel: "epoch",
        ylabel: "value",
        extra: "",
        plot: "'DATA' using 1:2 with lines title 'loss', '' using 1:3 with lines title 'flow accuracy'",
    },
    Chart {
        stem: "history_dropout",
        title: "Training history (feature dropout)",
        xlabel: "epoch",
        ylabel: "value",
        extra: "",
        plot: "'DATA' using 1:2 with lines title 'loss', '' using 1:3 with lines title 'flow accuracy'",
    },
    Chart {
        stem: "ars_rounds",
        title: "ARS escalation",
        xlabel: "kappa",
        ylabel: "candidate ARS",
        extra: "set logscale x 2\n",
        plot: "'DATA' using 2:5 with linespoints title 'candidate ARS'",
    },
    Chart {
        stem: "advtrain_trajectory",
        title: "ARS during adversarial training",
        xlabel: "cycle",
        ylabel: "ARS",
        extra: "",
        plot: "'DATA' using 1:3 with linespoints title 'ARS', '' using 1:4 axes x1y2 with linespoints title 'adversarial ratio'",
    },
    Chart {
        stem: "explain_pdp",
        title: "Conditional partial dependence",
        xlabel: "feature value",
        ylabel: "mean confidence",
        extra: "",
        plot: "'DATA' using 4:6:7 with filledcurves fs transparent solid 0.2 title 'min-max', '' using 4:5 with lines title 'mean'",
    },
    Chart {
        stem: "explain_seqpdp",
        title: "Sequential partial dependence",
        xlabel: "feature value",
        ylabel: "mean confidence",
        extra: "",
        plot: "'DATA' using 4:6:7 with filledcurves fs transparent solid 0.2 title 'min-max', '' using 4:5 with lines title 'mean'",
    },
    Chart {
        stem: "explain_confidence",
        title: "Confidence per step",
        xlabel: "step",
        ylabel: "mean confidence",
        extra: "",
        plot: "'DATA' using 2:3 with linespoints title 'mean confidence'",
    },
    Chart {
        stem: "explain_profile",
        title: "Feature profile per step",
        xlabel: "step",
        ylabel: "value",
        extra: "",
        plot: "'DATA' using 3:4:5 with yerrorbars title 'mean +- std', '' using 3:4 with lines notitle",
    },
    Chart {
        stem: "explain_weights",
        title: "Importance from weights",
        xlabel: "",
        ylabel: "score",
        extra: "set style fill solid 0.6\nset xtics rotate by -45\n",
        plot: IMPORTANCE_PLOT,
    },
    Chart {
        stem: "explain_perturb",
        title: "Perturbation importance",
        xlabel: "",
        ylabel: "accuracy drop",
        extra: "set style fill solid 0.6\nset xtics rotate by -45\n",
        plot: IMPORTANCE_PLOT,
    },
    Chart {
        stem: "explain_dropout",
        title: "Feature dropout importance",
        xlabel: "",
        ylabel: "accuracy drop",
        extra: "set style fill solid 0.6\nset xtics rotate by -45\n",
        plot: IMPORTANCE_PLOT,
    },
    Chart {
        stem: "explain_mi",
        title: "Sensitivity (mutual information)",
        xlabel: "",
        ylabel: "bits",
        extra: "set style fill solid 0.6\nset xtics rotate by -45\n",
        plot: IMPORTANCE_PLOT,
    },
    Chart {
        stem: "attack_cw",
        title: "CW: logit before and after",
        xlabel: "initial logit",
        ylabel: "final logit",
        extra: "",
        plot: "'DATA' using 7:8 with points title 'flows'",
    },
    Chart {
        stem: "attack_pgd",
        title: "PGD: logit before and after",
        xlabel: "initial logit",
        ylabel: "final logit",
        extra: "",
        plot: "'DATA' using 7:8 with points title 'flows'",
    },
    Chart {
        stem: "attack_fgsm",
        title: "FGSM: logit before and after",
        xlabel: "initial logit",
        ylabel: "final logit",
        extra: "",
        plot: "'DATA' using 7:8 with points title 'flows'",
    },
];

fn script(chart: &Chart) -> String {
    let data = format!("../{}.csv", chart.stem);
    format!(
        "# gnuplot {stem}.gp, run from this directory\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 900,540\n\
         set output '{stem}.png'\n\
         set title '{title}'\n\
         set xlabel '{xlabel}'\n\
         set ylabel '{ylabel}'\n\
         {extra}\
         plot {plot}\n",
        stem = chart.stem,
        title = chart.title,
        xlabel = chart.xlabel,
        ylabel = chart.ylabel,
        extra = chart.extra,
        plot = chart.plot.replace("DATA", &data),
    )
}

/// One `plots/<stem>.gp` per known CSV artifact present in `dir`.
pub fn scripts(dir: &Path) -> anyhow::Result<Vec<(String, Vec<u8>)>> {
    let out: Vec<(String, Vec<u8>)> = CHARTS
        .iter()
        .filter(|s| dir.join(format!("{}.csv", s.stem)).is_file())
        .map(|s| (format!("plots/{}.gp", s.stem), script(s).into_bytes()))
        .collect();
    if out.is_empty() {
        return Err(io::Error::new(
            io::ErrorKind::NotFound,
            format!("no plottable CSV artifacts in {}", dir.display()),
        )
        .into());
    }
    Ok(out)
}
