// DOM rendering. The whole page is rebuilt from ViewState on every change;
// nothing is kept in the DOM between renders, so the view can never disagree
// with the server for longer than one refresh.
import { chartGeometry, apSeries, positivesSeries, poolFractionReadout } from "./charts.js";
const CHART_BOX = { width: 360, height: 180, pad: 28 };
const SVG_NS = "http://www.w3.org/2000/svg";
function el(tag, className, text) {
    const node = document.createElement(tag);
    if (className)
        node.className = className;
    if (text !== undefined)
        node.textContent = text;
    return node;
}
function header(state) {
    const bar = el("header", "topbar");
    const snap = state.snapshot;
    bar.appendChild(el("h1", "title", snap ? `labeling: ${snap.concept}` : "labeling"));
    if (snap) {
        const stats = el("div", "stats");
        stats.appendChild(el("span", "stat", `${snap.labeled} / ${snap.budget} labeled`));
        stats.appendChild(el("span", "stat", `${snap.positives} positives`));
        stats.appendChild(el("span", "stat", `pool ${(snap.pool_frac * 100).toFixed(1)}%`));
        const progress = el("div", "progress");
        const fill = el("div", "progress-fill");
        fill.style.width = `${Math.min(100, (100 * snap.labeled) / snap.budget).toFixed(2)}%`;
        progress.appendChild(fill);
        bar.appendChild(stats);
        bar.appendChild(progress);
    }
    return bar;
}
function payloadCard(item) {
    const card = el("div", "payload");
    const fallback = () => {
        card.replaceChildren(el("div", "payload-id", item.external_id));
    };
    if (item.payload_uri) {
        const img = document.createElement("img");
        img.alt = item.external_id;
        img.onerror = fallback; // broken media degrades to the id tile
        img.src = item.payload_uri;
        card.appendChild(img);
        card.appendChild(el("div", "payload-caption", item.external_id));
    }
    else {
        fallback();
    }
    return card;
}
function labelControls(state, actions) {
    const busy = state.phase === "submitting";
    const controls = el("div", "controls");
    const positive = el("button", "btn positive", "Positive (p)");
    const negative = el("button", "btn negative", "Negative (n)");
    positive.disabled = busy;
    negative.disabled = busy;
    positive.onclick = () => actions.choose(1);
    negative.onclick = () => actions.choose(-1);
    controls.appendChild(positive);
    controls.appendChild(negative);
    return controls;
}
function chart(title, series, decimals) {
    const wrap = el("figure", "chart");
    wrap.appendChild(el("figcaption", "chart-title", title));
    const geo = chartGeometry(series, CHART_BOX);
    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${CHART_BOX.width} ${CHART_BOX.height}`);
    svg.setAttribute("role", "img");
    const axis = (x1, y1, x2, y2) => {
        const line = document.createElementNS(SVG_NS, "line");
        line.setAttribute("x1", String(x1));
        line.setAttribute("y1", String(y1));
        line.setAttribute("x2", String(x2));
        line.setAttribute("y2", String(y2));
        line.setAttribute("class", "axis");
        svg.appendChild(line);
    };
    axis(CHART_BOX.pad, CHART_BOX.pad, CHART_BOX.pad, CHART_BOX.height - CHART_BOX.pad);
    axis(CHART_BOX.pad, CHART_BOX.height - CHART_BOX.pad, CHART_BOX.width - CHART_BOX.pad, CHART_BOX.height - CHART_BOX.pad);
    for (const tick of geo.xTicks) {
        const label = document.createElementNS(SVG_NS, "text");
        label.setAttribute("x", String(tick.px));
        label.setAttribute("y", String(CHART_BOX.height - CHART_BOX.pad + 16));
        label.setAttribute("class", "tick");
        label.setAttribute("text-anchor", "middle");
        label.textContent = String(tick.value);
        svg.appendChild(label);
    }
    for (const tick of geo.yTicks) {
        const label = document.createElementNS(SVG_NS, "text");
        label.setAttribute("x", String(CHART_BOX.pad - 6));
        label.setAttribute("y", String(tick.py + 4));
        label.setAttribute("class", "tick");
        label.setAttribute("text-anchor", "end");
        label.textContent = tick.value.toFixed(decimals);
        svg.appendChild(label);
    }
    for (const points of geo.segments) {
        const line = document.createElementNS(SVG_NS, "polyline");
        line.setAttribute("points", points);
        line.setAttribute("class", "series");
        svg.appendChild(line);
    }
    for (const marker of geo.markers) {
        const dot = document.createElementNS(SVG_NS, "circle");
        dot.setAttribute("cx", String(marker.x));
        dot.setAttribute("cy", String(marker.y));
        dot.setAttribute("r", "2.5");
        dot.setAttribute("class", "marker");
        svg.appendChild(dot);
    }
    wrap.appendChild(svg);
    return wrap;
}
function metricsPanel(records) {
    const panel = el("section", "metrics");
    panel.appendChild(chart("average precision", apSeries(records), 2));
    panel.appendChild(chart("positives found", positivesSeries(records), 0));
    const pool = poolFractionReadout(records);
    panel.appendChild(el("div", "pool-readout", pool === null ? "no rounds yet" : `candidate pool: ${(pool * 100).toFixed(1)}% of the corpus`));
    return panel;
}
export function render(root, state, actions) {
    const page = el("div", "page");
    page.appendChild(header(state));
    const main = el("main", "main");
    switch (state.phase) {
        case "loading":
            main.appendChild(el("div", "notice", "loading session..."));
            break;
        case "error": {
            const banner = el("div", "banner");
            banner.appendChild(el("div", "banner-text", state.error ?? "request failed"));
            const retry = el("button", "btn", "Retry (r)");
            retry.onclick = () => actions.retry();
            banner.appendChild(retry);
            main.appendChild(banner);
            break;
        }
        case "complete": {
            const done = el("div", "complete");
            done.appendChild(el("h2", undefined, "Session complete"));
            if (state.snapshot) {
                done.appendChild(el("p", undefined, `${state.snapshot.labeled} labels spent, ${state.snapshot.positives} positives found.`));
            }
            main.appendChild(done);
            break;
        }
        case "ready":
        case "submitting":
            if (state.item) {
                main.appendChild(payloadCard(state.item));
                main.appendChild(labelControls(state, actions));
            }
            break;
    }
    page.appendChild(main);
    page.appendChild(metricsPanel(state.records));
    const footer = el("footer", "footer");
    footer.appendChild(el("span", undefined, "keys: p positive, n negative, c checkpoint, r retry"));
    if (state.checkpointPath) {
        footer.appendChild(el("span", "saved", `checkpoint saved: ${state.checkpointPath}`));
    }
    page.appendChild(footer);
    root.replaceChildren(page);
}
