//! Minimal QQ-plot rendering: sorted p-values against uniform quantiles
//! with a diagonal reference line. Coordinates are formatted with fixed
//! precision, so the same inputs always produce the same bytes.

const SIZE: f64 = 460.0;
const MARGIN: f64 = 55.0;
const PLOT: f64 = 350.0;

fn xpix(u: f64) -> f64 {
    MARGIN + PLOT * u
}

fn ypix(p: f64) -> f64 {
    MARGIN + PLOT * (1.0 - p)
}

/// Renders a QQ plot of p-values. The i-th smallest value is drawn at
/// uniform quantile (i+1)/(m+1); an empty slice still yields axes and the
/// reference diagonal.
pub fn qq_svg(pvalues: &[f64]) -> String {
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();

    let mut s = String::with_capacity(2048 + 64 * m);
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" \
         viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{PLOT}\" height=\"{PLOT}\" fill=\"none\" \
         stroke=\"black\" stroke-width=\"1\"/>\n",
        MARGIN, MARGIN
    ));
    s.push_str(&format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999999\" \
         stroke-width=\"1\" stroke-dasharray=\"5,4\"/>\n",
        xpix(0.0),
        ypix(0.0),
        xpix(1.0),
        ypix(1.0)
    ));
    for tick in [0.0, 0.5, 1.0] {
        s.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" \
             stroke-width=\"1\"/>\n",
            xpix(tick),
            MARGIN + PLOT,
            xpix(tick),
            MARGIN + PLOT + 6.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">{tick}</text>\n",
            xpix(tick),
            MARGIN + PLOT + 20.0
        ));
        s.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" \
             stroke-width=\"1\"/>\n",
            MARGIN - 6.0,
            ypix(tick),
            MARGIN,
            ypix(tick)
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"end\">{tick}</text>\n",
            MARGIN - 10.0,
            ypix(tick) + 4.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">uniform quantile</text>\n",
        MARGIN + PLOT / 2.0,
        SIZE - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 {x:.1} {y:.1})\">selective p-value</text>\n",
        15.0,
        MARGIN + PLOT / 2.0,
        x = 15.0,
        y = MARGIN + PLOT / 2.0
    ));
    for (i, &p) in sorted.iter().enumerate() {
        let u = (i + 1) as f64 / (m + 1) as f64;
        s.push_str(&format!(
            "<circle cx=\"{:.4}\" cy=\"{:.4}\" r=\"2.5\" fill=\"#30507a\" \
             fill-opacity=\"0.7\"/>\n",
            xpix(u),
            ypix(p.clamp(0.0, 1.0))
        ));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_render_identical_bytes() {
        let p = vec![0.8, 0.1, 0.4];
        assert_eq!(qq_svg(&p), qq_svg(&p));
    }

    #[test]
    fn empty_input_still_draws_the_frame() {
        let s = qq_svg(&[]);
        assert!(s.starts_with("<svg"));
        assert!(s.contains("uniform quantile"));
        assert!(!s.contains("<circle"));
    }

    #[test]
    fn points_land_inside_the_plot_area() {
        let s = qq_svg(&[0.0, 0.5, 1.0]);
        assert_eq!(s.matches("<circle").count(), 3);
        for part in s.split("cx=\"").skip(1) {
            let cx: f64 = part.split('"').next().unwrap().parse().unwrap();
            assert!((MARGIN..=MARGIN + PLOT).contains(&cx));
        }
    }
}
