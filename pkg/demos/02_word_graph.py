# coding: utf-8
"""Linking cells through a word taxonomy."""

# %% [markdown]
# Two cells are linked when some word of one and some word of the other map to taxonomy nodes
# at the same depth whose lowest common ancestor is at most `eps_depth` levels above them.
# A tiny taxonomy makes the rule easy to follow.

# %%
from tabularnet.lexgraph import (
    build_grid_graph,
    build_tlbr_graph,
    build_wordnet_graph,
    demo_lexicon,
    demo_taxonomy,
    parse_lexicon,
    parse_taxonomy,
    word_set,
)
from tabularnet.table import RawCell, RawTable, normalize

taxonomy = parse_taxonomy("""\
animal\tentity
artifact\tentity
dog\tanimal
cat\tanimal
car\tartifact
""")
lexicon = parse_lexicon("dog\tdog\ncat\tcat\ncar\tcar\npet\tdog,cat\n", taxonomy)
print({n: taxonomy.depth[n] for n in sorted(taxonomy.nodes)})
print("lca(dog, car) =", taxonomy.lca("dog", "car"))


def grid(rows):
    cells = tuple(RawCell(r, c, t) for r, row in enumerate(rows) for c, t in enumerate(row))
    return normalize(RawTable("demo", len(rows), len(rows[0]), cells))


table = grid([["dog", "cat"], ["car", "42"]])

# %% [markdown]
# dog and cat share their parent (gap 1). dog and car only meet at the root (gap 2),
# so they are linked once `eps_depth` reaches 2. Numbers carry no known word.

# %%
for eps in (0, 1, 2):
    print(eps, sorted(build_wordnet_graph(table, taxonomy, lexicon, eta=3, eps_depth=eps).edges))
print("strict, eps=2:", sorted(build_wordnet_graph(table, taxonomy, lexicon, 3, 2, strict=True).edges))

# %% [markdown]
# `eta` caps how many nodes each word contributes. "pet" maps to dog then cat.

# %%
print(word_set("pet", lexicon, eta=1), word_set("pet", lexicon, eta=2))

# %% [markdown]
# The bundled demo taxonomy covers the vocabulary of the synthetic tables. The grid and
# top-left-to-bottom-right graphs are the structural baselines.

# %%
tax = demo_taxonomy()
lex = demo_lexicon(tax)
print(len(tax.nodes), "taxonomy nodes,", len(lex.synsets), "lexicon words")
months = grid([["January", "March", "Total"], ["Apples", "Pears", "12"]])
g = build_wordnet_graph(months, tax, lex)
print(g.export())
print(len(build_grid_graph(months).edges), "grid edges;", len(build_tlbr_graph(months).edges), "directed tlbr edges")
