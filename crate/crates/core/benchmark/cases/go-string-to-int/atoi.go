package main

import (
	"fmt"
	"strconv"
)

func main() {
	port, _ := strconv.Atoi("8080")
	next := port + 1
	fmt.Println(strconv.Itoa(next))
}
