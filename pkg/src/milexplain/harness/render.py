"""Static report rendering: a plain-text score table, ANSI and HTML highlights."""
from __future__ import annotations

import html

SIDES = ("premise", "hypothesis")
_ANSI_ON = "\x1b[1;30;43m"
_ANSI_OFF = "\x1b[0m"


def _fmt(v, spec):
    return "-" if v is None else format(v, spec)


def score_table(rows):
    """``rows``: iterable of ``(method, TokenScoreReport | None, RuntimeReport | None)``.

    Columns: runtime per instance, then P/R/F1 for premise and hypothesis.
    """
    head = f"{'method':<16} {'time (s)':>10} | {'P':>6} {'R':>6} {'F1':>6} | {'P':>6} {'R':>6} {'F1':>6}"
    top = f"{'':<16} {'':>10} | {'premise':^20} | {'hypothesis':^20}"
    lines = [top, head, "-" * len(head)]
    base = None
    for method, score, runtime in rows:
        cells = [f"{method:<16}", f"{_fmt(runtime.mean if runtime else None, '10.4f'):>10}"]
        for n, side in enumerate(SIDES):
            cells.append("|")
            s = score.side(side) if score else None
            for attr in ("precision", "recall", "f1"):
                cells.append(f"{_fmt(getattr(s, attr) if s else None, '6.2f'):>6}")
        lines.append(" ".join(cells))
        if score is not None and base is None:
            base = score
    if base is not None:
        lines.append("")
        lines.append(
            f"select-all precision: premise {base.premise.select_all_precision:.2f}, "
            f"hypothesis {base.hypothesis.select_all_precision:.2f}; "
            f"{base.instances} instances, {base.average}-averaged; "
            f"empty gold: premise {base.premise.empty_gold}, "
            f"hypothesis {base.hypothesis.empty_gold}")
    return "\n".join(lines) + "\n"


def ansi_sentence(tokens, selected):
    return " ".join(f"{_ANSI_ON}{t}{_ANSI_OFF}" if i in selected else t
                    for i, t in enumerate(tokens))


def ansi_instance(instance, explanation, label_names=None):
    lines = []
    if label_names and explanation.predicted is not None:
        lines.append(f"[{explanation.method}] predicted {label_names[explanation.predicted]}")
    lines.append("P: " + ansi_sentence(instance.premise, explanation.premise))
    lines.append("H: " + ansi_sentence(instance.hypothesis, explanation.hypothesis))
    return "\n".join(lines)


def _html_sentence(tokens, selected):
    return " ".join(f"<mark>{html.escape(t)}</mark>" if i in selected else html.escape(t)
                    for i, t in enumerate(tokens))


_STYLE = """body{font-family:sans-serif;max-width:60em;margin:2em auto}
mark{background:#fd4;padding:0 .15em}
.pair{margin:.6em 0;padding:.4em;border-left:3px solid #ccc}
.gold{color:#555}
table{border-collapse:collapse}td,th{padding:.2em .6em;border-bottom:1px solid #ddd;text-align:right}
td:first-child,th:first-child{text-align:left}"""


def html_report(title, table_text, instances, explanations_by_method, label_names, limit=50):
    """Standalone HTML page: the score table and highlighted instances.

    ``explanations_by_method`` maps method name to a list aligned with
    ``instances`` (entries may be None for failed explanations).
    """
    out = ["<!DOCTYPE html>", "<html><head><meta charset='utf-8'>",
           f"<title>{html.escape(title)}</title><style>{_STYLE}</style></head><body>",
           f"<h1>{html.escape(title)}</h1>", f"<pre>{html.escape(table_text)}</pre>"]
    for n, inst in enumerate(instances[:limit]):
        out.append(f"<h3>#{n} gold: {html.escape(inst.label)}</h3>")
        out.append("<div class='pair gold'>gold<br>P: "
                   + _html_sentence(inst.premise, inst.premise_highlights)
                   + "<br>H: " + _html_sentence(inst.hypothesis, inst.hypothesis_highlights)
                   + "</div>")
        for method, exps in explanations_by_method.items():
            e = exps[n] if n < len(exps) else None
            if e is None:
                out.append(f"<div class='pair'>{html.escape(method)}: failed</div>")
                continue
            pred = label_names[e.predicted] if e.predicted is not None else "?"
            out.append(f"<div class='pair'>{html.escape(method)} (predicted {pred})<br>P: "
                       + _html_sentence(inst.premise, e.premise)
                       + "<br>H: " + _html_sentence(inst.hypothesis, e.hypothesis) + "</div>")
    out.append("</body></html>")
    return "\n".join(out) + "\n"
