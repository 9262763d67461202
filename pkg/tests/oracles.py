"""Brute-force metric recomputations in plain Python, exact via Fraction."""

from fractions import Fraction


def accuracy(pred, gold):
    return Fraction(sum(1 for p, y in zip(pred, gold) if p == y), len(gold))


def top5(rankings, gold):
    hits = 0
    for ranking, y in zip(rankings, gold):
        for r in ranking:
            if r == y:
                hits += 1
                break
    return Fraction(hits, len(gold))


def macro_f1(pred, gold, k):
    total = Fraction(0)
    for c in range(k):
        tp = sum(1 for p, y in zip(pred, gold) if p == c and y == c)
        n_pred = sum(1 for p in pred if p == c)
        n_gold = sum(1 for y in gold if y == c)
        prec = Fraction(tp, n_pred) if n_pred else Fraction(0)
        rec = Fraction(tp, n_gold) if n_gold else Fraction(0)
        if prec + rec:
            total += 2 * prec * rec / (prec + rec)
    return total / k


def per_emoji(pred_sets, gold_sets, k):
    n = len(gold_sets)
    per = [Fraction(sum(1 for p, g in zip(pred_sets, gold_sets) if (e in p) == (e in g)), n) for e in range(k)]
    return per, sum(per) / k
