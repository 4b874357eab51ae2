from collections import namedtuple

RatioSummary = namedtuple('RatioSummary', ['count', 'maximum', 'mean', 'above_bound'])


class RatioTracker:
    """Running max/mean of ratios with a count of values above a bound."""

    def __init__(self, bound=None, tolerance=1e-9):
        self.bound = bound
        self.tolerance = tolerance
        self.count = 0
        self.total = 0.0
        self.maximum = 0.0
        self.above_bound = 0

    def add(self, value):
        self.count += 1
        self.total += value
        if value > self.maximum:
            self.maximum = value
        if self.bound is not None and value > self.bound * (1 + self.tolerance):
            self.above_bound += 1

    def mean(self):
        return self.total / self.count if self.count else 0.0

    def summary(self):
        return RatioSummary(self.count, self.maximum, self.mean(), self.above_bound)
