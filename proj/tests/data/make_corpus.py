#!/usr/bin/env python3
# Regenerates the assembled part of corpus.smi: ring scaffolds with
# substituent sites filled recursively. Ring labels are allocated fresh so
# nested rings never collide.
import random
import sys

SCAFFOLDS = [
    "c{r}cc{s}ccc{r}{s}",
    "c{r}ccc{s}c{s}c{r}",
    "c{r}ccnc{s}c{r}",
    "c{r}cc{s}c{r2}ccccc{r2}c{r}",
    "c{r}cc{s}sc{r}",
    "c{r}cc{s}oc{r}",
    "c{r}c{s}[nH]c{r2}ccccc{r2}{r}",
    "n{r}c{s}nc{s}cc{r}",
    "C{r}CCN{s}CC{r}",
    "C{r}CN{s}CCN{r}{s}",
    "C{r}CCC{s}CC{r}",
    "C{r}COC{s}C{r}",
    "C{r}CC{r}{s}",
    "C{r}CC(=O)N{r}{s}",
    "c{r}nc{s}c{r2}ccccc{r2}n{r}",
    "C{r}C{r2}CC{s}C{r}C{r2}",
]
SUBST = [
    "C", "CC", "CCC", "CC(C)C", "C(C)(C)C", "OC", "O", "N", "N(C)C", "F", "Cl", "Br", "I",
    "C(F)(F)F", "C#N", "C(=O)O", "C(=O)OC", "C(=O)N", "C(=O){s}", "NC(=O){s}", "S(=O)(=O)N",
    "S(=O)(=O){s}", "CO{s}", "CN{s}", "CC{s}", "O{s}", "N{s}", "{scaf}", "C{scaf}", "C(=O){scaf}",
    "C=CC", "C#CC", "[N+](=O)[O-]", "SC", "CCCCC", "OCCO", "C(O)C{s}",
]


class Builder:
    def __init__(self, rng):
        self.rng = rng
        self.ring = 0

    def label(self):
        self.ring += 1
        return str(self.ring) if self.ring < 10 else "%" + str(self.ring)

    def scaffold(self, depth):
        t = self.rng.choice(SCAFFOLDS)
        r, r2 = self.label(), self.label()
        t = t.replace("{r2}", r2).replace("{r}", r)
        while "{s}" in t:
            sub = self.subst(depth + 1)
            t = t.replace("{s}", "(" + sub + ")" if sub else "", 1)
        return t

    def subst(self, depth):
        if self.rng.random() < 0.35 + 0.2 * depth:
            return ""
        s = self.rng.choice(SUBST)
        if depth > 2:
            while "{" in s:
                s = self.rng.choice(SUBST)
        if "{scaf}" in s:
            s = s.replace("{scaf}", self.scaffold(depth))
        while "{s}" in s:
            s = s.replace("{s}", self.subst(depth + 1) or "C", 1)
        return s

    def molecule(self):
        self.ring = 0
        return self.scaffold(0)


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 400
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 20240611
    rng = random.Random(seed)
    b = Builder(rng)
    seen = set()
    k = 0
    while k < n:
        m = b.molecule()
        if m in seen or len(m) > 90:
            continue
        seen.add(m)
        k += 1
        print(f"{m} gen{k:04d}")


if __name__ == "__main__":
    main()
