package main

import (
	"fmt"
	"strconv"
)

func main() {
	inputs := []string{"12", "x", "30"}
	sum := 0
	for _, s := range inputs {
		n, _ := strconv.Atoi(s)
		sum += n
	}
	fmt.Println(sum)
}
