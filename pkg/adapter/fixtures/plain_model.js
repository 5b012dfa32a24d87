// A model over built-in types only; its dependency manifest must be empty.
const { defineModel, f64, listOf } = require("modelport-adapter");

const model = defineModel({
  double: {
    input: { x: listOf(f64) },
    output: { y: listOf(f64) },
    fn: (msg) => ({ y: msg.x.map((v) => 2 * v) }),
  },
});

module.exports = { model };
