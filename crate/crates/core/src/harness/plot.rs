//! Matplotlib scripts written next to CSV outputs.

/// What a CSV file holds, for choosing axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    LoadCurve,
    Sweep,
    Conjecture,
    Fluid,
}

pub fn script(kind: PlotKind, csv_name: &str) -> String {
    let body = match kind {
        PlotKind::LoadCurve => {
            "ax.plot(df['tau'], df['L'])\n\
             ax.axhline(1.0, color='grey', lw=0.8, ls='--')\n\
             ax.set_xscale('log')\n\
             ax.set_xlabel('timeout')\n\
             ax.set_ylabel('load reduction L')\n"
        }
        PlotKind::Sweep => {
            "for scheme, g in df.groupby('scheme'):\n\
             \x20   g = g[~g['diverged']]\n\
             \x20   ax.errorbar(g['load'], g['mean_response'], yerr=g['ci95'], label=scheme, capsize=2)\n\
             ax.set_yscale('log')\n\
             ax.set_xlabel('offered load')\n\
             ax.set_ylabel('mean response time')\n\
             ax.legend()\n"
        }
        PlotKind::Conjecture => {
            "ax.errorbar(df['load'], df['sim_mean'], yerr=df['sim_ci95'], fmt='o', label='simulation')\n\
             f = pd.to_numeric(df['formula_mean'], errors='coerce')\n\
             ax.plot(df['load'], f, label='mean-field estimate')\n\
             ax.set_xlabel('offered load')\n\
             ax.set_ylabel('mean response time')\n\
             ax.legend()\n"
        }
        PlotKind::Fluid => {
            "ax.plot(df['t'], df['G'], label='G')\n\
             ax.plot(df['t'], df['total_mass'], label='total mass')\n\
             ax.set_xlabel('t')\n\
             ax.legend()\n"
        }
    };
    format!(
        "import sys\n\
         import pandas as pd\n\
         import matplotlib\n\
         matplotlib.use('Agg')\n\
         import matplotlib.pyplot as plt\n\
         \n\
         df = pd.read_csv(sys.argv[1] if len(sys.argv) > 1 else {csv_name:?})\n\
         fig, ax = plt.subplots(figsize=(6, 4))\n\
         {body}\
         fig.tight_layout()\n\
         fig.savefig({png:?}, dpi=150)\n",
        png = format!("{}.png", csv_name.trim_end_matches(".csv")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_mentions_columns() {
        let s = script(PlotKind::Sweep, "sweep.csv");
        assert!(s.contains("read_csv(sys.argv[1] if len(sys.argv) > 1 else \"sweep.csv\")"));
        assert!(s.contains("savefig(\"sweep.png\""));
        assert!(s.contains("    ax.errorbar"));
    }
}
