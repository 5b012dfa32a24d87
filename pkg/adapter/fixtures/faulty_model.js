// Raises from user code when asked to double 13; exercises user_error paths.
const { defineModel, f64, listOf } = require("modelport-adapter");

const model = defineModel({
  double: {
    input: { x: listOf(f64) },
    output: { y: listOf(f64) },
    fn: (msg) => {
      if (msg.x.includes(13)) {
        throw new Error("refusing to double 13");
      }
      return { y: msg.x.map((v) => 2 * v) };
    },
  },
});

module.exports = { model };
