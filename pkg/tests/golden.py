"""Matrices printed for the 4-vehicle example (clusters {1,2,3}, {1,2,4}, K=L=3)."""

PRINTED_G_MINUS = [[1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 1, 0, 0]]
PRINTED_G_PLUS = [[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]]
PRINTED_Q = [[0, 0, 0], [1, 0, 0], [1, 1, 0]]
# printed as N x U columns; the package stores H as U x N rows
PRINTED_H_MINUS_COLUMN = [0, 0, 1, 0]
PRINTED_H_PLUS_COLUMN = [0, 0, 0, 1]
