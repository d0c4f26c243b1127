"""Independent reference implementations used as test oracles."""

import math


def tally(y_true, y_pred):
    tp = tn = fp = fn = 0
    for t, p in zip(y_true, y_pred):
        if t == 1 and p == 1:
            tp += 1
        elif t == -1 and p == -1:
            tn += 1
        elif t == -1 and p == 1:
            fp += 1
        else:
            fn += 1
    return tp, tn, fp, fn


def appendix_fields(y_true, y_pred):
    tp, tn, fp, fn = tally(y_true, y_pred)

    def ratio(a, b):
        return a / b if b else math.nan

    fpr, fnr = ratio(fp, fp + tn), ratio(fn, fn + tp)
    return {
        "Accuracy": (tp + tn) / len(y_true),
        "FPR": fpr,
        "FNR": fnr,
        "TPR": 1 - fnr,
        "TNR": 1 - fpr,
        "Recall": 1 - fnr,
        "TP": tp, "FP": fp, "TN": tn, "FN": fn,
    }


def di(y_pred, s):
    pos = {0: 0, 1: 0}
    cnt = {0: 0, 1: 0}
    for p, k in zip(y_pred, s):
        cnt[k] += 1
        pos[k] += p == 1
    if not cnt[0] or not cnt[1]:
        raise ValueError("empty category")
    r0, r1 = pos[0] / cnt[0], pos[1] / cnt[1]
    if r0 == 0 and r1 == 0:
        return 0.0
    if r0 == 0 or r1 == 0:
        return 1.0
    ratio = r0 / r1
    return 1 - min(ratio, 1 / ratio)


def rate(y_true, y_pred, s, kind, cat):
    # kind -> (which true label defines the set, which prediction is counted)
    true_label, counted = {"FPR": (-1, 1), "TNR": (-1, -1), "FNR": (1, -1), "TPR": (1, 1)}[kind]
    den = num = 0
    for t, p, k in zip(y_true, y_pred, s):
        if k == cat and t == true_label:
            den += 1
            num += p == counted
    if den == 0:
        raise ValueError("empty set")
    return num / den


def gap(y_true, y_pred, s, kind):
    return abs(rate(y_true, y_pred, s, kind, 0) - rate(y_true, y_pred, s, kind, 1))


def dm(y_true, y_pred, s):
    return (gap(y_true, y_pred, s, "FPR") + gap(y_true, y_pred, s, "FNR")) / 2


def metric(name, y_true, y_pred, s):
    if name == "DI":
        return di(y_pred, s)
    if name == "DM":
        return dm(y_true, y_pred, s)
    return gap(y_true, y_pred, s, name)


def sweep(probs, y, s, name, guard=0.05):
    """Exhaustive cut-off re-sweep with the documented tie-break."""
    def acc(v):
        return sum((1 if p >= v else -1) == t for p, t in zip(probs, y)) / len(y)

    base = acc(0.5)
    best = None
    for k in range(1, 100):
        v = k / 100
        a = acc(v)
        if a < (1 - guard) * base - 1e-12:
            continue
        pred = [1 if p >= v else -1 for p in probs]
        try:
            f = metric(name, y, pred, s)
        except ValueError:
            continue
        key = (round(a - f, 12), -round(abs(v - 0.5), 12), -v)
        if best is None or key > best[0]:
            best = (key, v)
    return None if best is None else best[1]
