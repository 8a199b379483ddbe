//! Minimal deterministic SVG line plots: a mean curve plus upper deviation
//! bounds, one file per appliance class and one for the aggregate.

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

pub struct PlotLine<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
    pub color: &'a str,
    pub dashed: bool,
}

fn fmt(value: f64) -> String {
    format!("{value:.2}")
}

/// Render a line chart over one simulated day. The x axis is labelled in
/// hours; the y range spans zero to the largest plotted value.
pub fn render_day_chart(title: &str, y_label: &str, step_minutes: u32, lines: &[PlotLine]) -> String {
    let steps = lines.iter().map(|l| l.values.len()).max().unwrap_or(0);
    let y_max = lines
        .iter()
        .flat_map(|l| l.values.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.05;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

    let x_of = |t: usize| MARGIN_LEFT + plot_w * t as f64 / (steps.max(2) - 1) as f64;
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v / y_max).clamp(0.0, 1.0));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_BOTTOM,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_BOTTOM
    ));

    // Hour ticks every four hours.
    let minutes_per_day = steps as f64 * step_minutes as f64;
    for hour in (0..=24).step_by(4) {
        let frac = (hour as f64 * 60.0 / minutes_per_day).min(1.0);
        let x = MARGIN_LEFT + plot_w * frac;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            fmt(x),
            HEIGHT - MARGIN_BOTTOM,
            fmt(x),
            HEIGHT - MARGIN_BOTTOM + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{hour}:00</text>\n",
            fmt(x),
            HEIGHT - MARGIN_BOTTOM + 20.0
        ));
    }

    // Y ticks.
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        let y = y_of(v);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" stroke=\"black\"/>\n",
            MARGIN_LEFT - 5.0,
            fmt(y),
            fmt(y)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            fmt(y + 4.0),
            fmt(v)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{y_label}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));

    // Curves and legend.
    for (idx, line) in lines.iter().enumerate() {
        let points: Vec<String> = line
            .values
            .iter()
            .enumerate()
            .map(|(t, &v)| format!("{},{}", fmt(x_of(t)), fmt(y_of(v))))
            .collect();
        let dash = if line.dashed {
            " stroke-dasharray=\"6,4\""
        } else {
            ""
        };
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
            line.color,
            points.join(" ")
        ));
        let legend_y = MARGIN_TOP + 16.0 * idx as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"1.5\"{dash}/>\n",
            WIDTH - MARGIN_RIGHT - 160.0,
            fmt(legend_y),
            WIDTH - MARGIN_RIGHT - 130.0,
            fmt(legend_y),
            line.color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            WIDTH - MARGIN_RIGHT - 124.0,
            fmt(legend_y + 4.0),
            line.label
        ));
    }

    svg.push_str("</svg>\n");
    svg
}
