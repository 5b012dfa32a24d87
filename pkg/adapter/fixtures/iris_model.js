// Nearest-centroid iris stub: four measurement columns in, class labels out.
const { defineModel, f64, i64, listOf } = require("modelport-adapter");
const { unzip } = require("lodash");

const CLASSES = [0, 1, 2];
const CENTROIDS = [
  [5.005999999999999, 3.428000000000001, 1.4620000000000002, 0.2459999999999999],
  [5.936, 2.7700000000000005, 4.26, 1.3259999999999998],
  [6.587999999999998, 2.9739999999999998, 5.552, 2.026],
];

function nearest(row) {
  let best = 0;
  let bestDistance = Infinity;
  CENTROIDS.forEach((centroid, i) => {
    const distance = centroid.reduce((sum, c, j) => sum + (row[j] - c) * (row[j] - c), 0);
    if (distance < bestDistance) {
      bestDistance = distance;
      best = i;
    }
  });
  return CLASSES[best];
}

const model = defineModel({
  classify: {
    input: {
      sepal_length: listOf(f64),
      sepal_width: listOf(f64),
      petal_length: listOf(f64),
      petal_width: listOf(f64),
    },
    output: { IrisType: listOf(i64) },
    fn: (msg) => {
      const rows = unzip([msg.sepal_length, msg.sepal_width, msg.petal_length, msg.petal_width]);
      return { IrisType: rows.map(nearest) };
    },
  },
});

module.exports = { model };
