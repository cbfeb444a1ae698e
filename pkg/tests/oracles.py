"""Independent reference implementations used only as test oracles.

These deliberately share no code with the package: plain loops over token
bitmaps and exhaustive enumerations, kept as dumb as possible.
"""
from collections import Counter


def merge_oracle(span_sets):
    """Token-bitmap reference for the recall-priority fill.

    span_sets: list of span lists in priority order, each span a
    (token_start, token_end, label) triple over a shared token line; returns
    the admitted triples as a set tagged with the producing run index.
    """
    owner = {}
    admitted = set()
    for run_index, spans in enumerate(span_sets):
        for span in sorted(spans):
            start, end, label = span
            if all(t not in owner for t in range(start, end)):
                for t in range(start, end):
                    owner[t] = run_index
                admitted.add((run_index, start, end, label))
    return admitted


def enumerate_flat_span_sets(n_tokens, labels):
    """Every flat (start, end, label) span set over a token line."""
    results = []

    def extend(next_free, acc):
        results.append(tuple(acc))
        for start in range(next_free, n_tokens):
            for end in range(start + 1, n_tokens + 1):
                for label in labels:
                    acc.append((start, end, label))
                    extend(end, acc)
                    acc.pop()

    extend(0, [])
    return results


def projection_oracle(span, links, n_target, min_coverage):
    """Recompute one span's projection by plain enumeration.

    span: (token_start, token_end, label); links: iterable of (i, j).
    Returns (reason, target_span_or_None, gapped).
    """
    start, end, label = span
    targets = sorted({j for (i, j) in links if start <= i < end})
    if not targets:
        return "unaligned", None, False
    linked = {i for (i, j) in links if start <= i < end}
    coverage = len(linked) / (end - start)
    if coverage < min_coverage:
        return "low-coverage", None, False
    lo, hi = targets[0], targets[-1] + 1
    return "projected", (lo, hi, label), (hi - lo) != len(targets)


def project_document_oracle(spans, links, n_target, min_coverage):
    """Document-level oracle: place projected spans in order, drop collisions."""
    taken = [False] * n_target
    placed = []
    reasons = []
    for span in sorted(spans):
        reason, target, _ = projection_oracle(span, links, n_target, min_coverage)
        if target is not None:
            lo, hi, label = target
            if any(taken[j] for j in range(lo, hi)):
                reason, target = "collision", None
            else:
                for j in range(lo, hi):
                    taken[j] = True
                placed.append(target)
        reasons.append(reason)
    return placed, reasons


def majority_oracle(verdicts):
    """Brute adjudication of one task's verdicts.

    verdicts: list of ("accept"|"reject"|("relabel", label)).
    Returns "accept" | "reject" | ("relabel", label) | "tie".
    """
    actions = Counter(v if isinstance(v, str) else "relabel" for v in verdicts)
    best = actions.most_common()
    if 2 * best[0][1] <= len(verdicts):
        return "tie"
    if len(best) > 1 and best[0][1] == best[1][1]:
        return "tie"
    action = best[0][0]
    if action != "relabel":
        return action
    labels = Counter(v[1] for v in verdicts if not isinstance(v, str))
    ranked = labels.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return "tie"
    return ("relabel", ranked[0][0])
