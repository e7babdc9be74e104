"""Walk one sentence through the grid encoder and decoder."""
from aste_grid import AnnotatedSentence, DependencyArc, Sentence, Span, Triplet
from aste_grid import GridTag, decode_grid, encode_grid

tokens = "Waiters are friendly and the fruit salad is so so".split()
sentence = AnnotatedSentence(
    Sentence(tokens),
    [DependencyArc(2, 0, "nsubj"), DependencyArc(9, 6, "nsubj"), DependencyArc(2, 9, "conj"),
     DependencyArc(6, 5, "compound")],
    [Triplet(Span(0, 0), Span(2, 2), "POS"), Triplet(Span(5, 6), Span(8, 9), "NEU")],
)

grid = encode_grid(sentence)

# upper triangle only; "." marks the N tag
width = max(len(t) for t in tokens)
print(" " * width, " ".join(f"{k:>3}" for k in range(grid.n)))
for i, word in enumerate(tokens):
    row = []
    for j in range(grid.n):
        if j < i:
            row.append("   ")
        else:
            tag = grid[i, j]
            row.append(f"{'.' if tag == GridTag.N else tag.name:>3}")
    print(f"{word:>{width}}", " ".join(row))

print()
for t in decode_grid(grid):
    aspect = " ".join(tokens[k] for k in t.aspect)
    opinion = " ".join(tokens[k] for k in t.opinion)
    print(f"({aspect}, {opinion}, {t.sentiment})")

# majority vote inside the fruit salad rectangle; a 2-2 tie goes to POS
one = grid.with_cell(5, 8, GridTag.POS)
two = one.with_cell(5, 9, GridTag.POS)
print("one POS cell:", decode_grid(one)[1].sentiment, " two POS cells:", decode_grid(two)[1].sentiment)
